// Error metrics against reference solutions, convergence-rate fits, selector
// Lipschitz probes, Euler-Maruyama rollouts and report output.

#ifndef HJIPI_ANALYSIS_HPP
#define HJIPI_ANALYSIS_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "hjipi/fdm.hpp"
#include "hjipi/pinn.hpp"

namespace hjipi {

using ConstVec = Eigen::Ref<const Eigen::VectorXd>;

// ||pred - ref||_2 / ||ref||_2. Throws when ref is zero.
double relative_l2_error(ConstVec pred, ConstVec ref);
double mse(ConstVec pred, ConstVec ref);

struct GridDescriptor {
  Box extent;
  std::vector<int> points;  // empty for scattered samples
  Eigen::Index samples = 0;

  std::string describe() const;
};

struct SliceError {
  double t = 0.0;
  double rel_l2 = 0.0;
  double mse = 0.0;
};

struct ErrorReport {
  std::string problem;
  std::string method;
  GridDescriptor grid;
  std::vector<SliceError> slices;  // ascending t

  void validate() const;
};

// Network values at the nodes of `reference` (already restricted to the
// target domain) against the stored slices at `times`. Every requested time
// must be a stored slice.
ErrorReport compare_to_grid(const NetworkState& state, ValueForm form,
                            const GameProblem& problem, const TimeGrid& reference,
                            const std::vector<double>& times, const std::string& method,
                            const EngineOptions& options = {});

using ValueFn = std::function<double(double t, VecRef x)>;

// Same metrics on n uniform points of the target domain, for references
// that are only available pointwise.
ErrorReport compare_to_function(const NetworkState& state, ValueForm form,
                                const GameProblem& problem, const ValueFn& reference,
                                const std::vector<double>& times, Eigen::Index n,
                                std::uint64_t seed, const std::string& method,
                                const EngineOptions& options = {});

// log E_n = intercept + slope n by least squares. E_n <= 0 is floored at
// machine epsilon.
struct RateFit {
  std::string label;
  std::vector<int> iterations;
  std::vector<double> changes;  // E_n
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;  // 1 when the data are exactly fitted

  double rho() const;  // exp(slope)
};

RateFit fit_log_linear(const std::vector<int>& iterations,
                       const std::vector<double>& changes, std::string label = {});

// E_n = validation sup-norm change of iterations first .. first + count - 1
// (count = 0: to the end). Requires at least 3 values.
RateFit convergence_history(const IterationHistory& history, int first = 1, int count = 0,
                            std::string label = {});

using SelectorMap = std::function<Eigen::VectorXd(double t, VecRef x, VecRef p)>;

enum class SelectorComponent { kA, kB, kBoth };

// Maps p to a*, b* or their concatenation.
SelectorMap make_selector_map(const GameProblem& problem, SelectorComponent component,
                              SelectorMode mode = SelectorMode::kClosedForm,
                              const MinimaxConfig& minimax = {});

struct SelectorProbeResult {
  std::string problem;
  double kappa_hat = 0.0;
  long samples = 0;
};

// t uniform on [0, T], x uniform on the training domain, p1 uniform on
// [-p_radius, p_radius]^d and p2 = p1 + s u with u a random unit vector and
// s log-uniform on [min_dp, p_radius]. kappa_hat = max |sel(p1) - sel(p2)| /
// |p1 - p2|.
SelectorProbeResult lipschitz_selector_probe(const GameProblem& problem,
                                             const SelectorMap& selector, long samples,
                                             std::uint64_t seed, double p_radius = 1.0,
                                             double min_dp = 1e-3);

using FeedbackPolicy = std::function<ControlPair(double t, VecRef x)>;

enum class Disturbance { kAdversarial, kZero };

// Controls from the gradient of a trained value function; b is the
// maximizing response or held at zero.
FeedbackPolicy network_feedback(std::shared_ptr<const NetworkState> state, ValueForm form,
                                const GameProblem& problem, SelectorMode mode,
                                const MinimaxConfig& minimax = {},
                                Disturbance disturbance = Disturbance::kAdversarial);

struct Trajectory {
  Eigen::VectorXd t;  // steps + 1
  Eigen::MatrixXd x;  // d x (steps + 1)
};

// X_{k+1} = X_k + f dt + sigma sqrt(dt) xi_k.
Trajectory euler_maruyama(const GameProblem& problem, const FeedbackPolicy& policy,
                          VecRef x0, double dt, long steps, std::uint64_t seed,
                          double t0 = 0.0);

// Path k uses derive_seed(seed, k); results do not depend on `workers`.
std::vector<Trajectory> euler_maruyama_paths(const GameProblem& problem,
                                             const FeedbackPolicy& policy, VecRef x0,
                                             double dt, long steps, long paths,
                                             std::uint64_t seed, int workers = 1);

struct DecompositionStats {
  long samples = 0;
  double mean_abs = 0.0;
  double max_abs = 0.0;
  double truncation = 0.0;  // mean |residual| of the 2-D pair solve alone
  double ratio = 0.0;       // mean_abs / truncation
};

// HJI residual of the summed pairwise reference for the N-D isotropic game,
// with derivatives from centered differences of the interpolant (space step
// dx, time step the slice spacing). Samples t in [dt_s, T - dt_s] and x in
// the target domain.
DecompositionStats decomposition_residual_check(const PairwiseReference& reference,
                                                const GameProblem& problem, long samples,
                                                std::uint64_t seed);

void write_errors_csv(const std::vector<ErrorReport>& reports, const std::string& path);
// Pivot with one row per (problem, method, metric) and one column per time.
void write_error_table_csv(const std::vector<ErrorReport>& reports, const std::string& path);
void write_rates_csv(const RateFit& fit, const std::string& path);
void write_probes_csv(const std::vector<SelectorProbeResult>& probes, const std::string& path);
void write_trajectories_csv(const std::vector<Trajectory>& paths, const std::string& path);

// errors.csv, table.csv, rates.csv (rates_<label>.csv when several fits),
// probes.csv and summary.txt under `dir`, created if missing.
void emit_report(const std::vector<ErrorReport>& reports, const std::vector<RateFit>& fits,
                 const std::vector<SelectorProbeResult>& probes, const std::string& dir);

}  // namespace hjipi

#endif  // HJIPI_ANALYSIS_HPP
