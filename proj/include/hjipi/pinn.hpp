// Mesh-free PINN policy iteration for
//
//   dv/dt + H(t, x, grad v) + 1/2 Tr(a D^2 v) = 0,  v(T, .) = g.
//
// Policy evaluation fits v_n by Adam on the mean squared residual of the
// linear PDE obtained by freezing (a, b) at the feedback of the previous
// iterate; policy improvement re-evaluates that feedback from the new
// gradient. Parameters are warm-started across outer iterations.

#ifndef HJIPI_PINN_HPP
#define HJIPI_PINN_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hjipi/adam.hpp"
#include "hjipi/jet.hpp"
#include "hjipi/minimax.hpp"

namespace hjipi {

// Seed streams derived from the run seed.
enum class SeedStream : std::uint64_t {
  kInit = 1,
  kCollocation = 2,
  kValidation = 3,
  kResidual = 4,
  kPolicy = 5,
  kTrajectory = 6,
};

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream,
                          std::uint64_t a = 0, std::uint64_t b = 0);

struct CollocationBatch {
  Eigen::VectorXd t;           // in [0, T)
  Eigen::MatrixXd x;           // d x n
  Eigen::MatrixXd terminal_x;  // d x n_bc, empty unless requested

  Eigen::Index size() const { return t.size(); }
};

// n i.i.d. uniform points over [0, T) x domain, plus n_terminal uniform
// points of the domain for the terminal penalty.
CollocationBatch sample_collocation(const Box& domain, double horizon,
                                    Eigen::Index n, std::uint64_t seed,
                                    Eigen::Index n_terminal = 0);

enum class SelectorMode { kClosedForm, kNumeric };

// The feedback that defines the frozen policy of one evaluation phase. An
// empty state is the initial policy: uniform over A x B, drawn
// independently at each (t, x) from a hash of the point and `seed`.
struct PolicySnapshot {
  std::shared_ptr<const NetworkState> state;
  ValueForm form = ValueForm::kAnsatz;
  SelectorMode mode = SelectorMode::kClosedForm;
  MinimaxConfig minimax;
  std::uint64_t seed = 0;

  bool is_uniform() const { return state == nullptr; }

  static PolicySnapshot uniform(std::uint64_t seed);
  static PolicySnapshot frozen(const NetworkState& state, ValueForm form,
                               SelectorMode mode, MinimaxConfig minimax = {});
};

// (a*, b*) for gradient p. Closed form when the problem has one and mode
// asks for it, numeric minimax otherwise. Always admissible.
ControlPair select_controls(const GameProblem& problem, SelectorMode mode,
                            const MinimaxConfig& minimax, double t, VecRef x,
                            VecRef p);

ControlPair policy_improvement(const PolicySnapshot& snapshot, double t,
                               VecRef x, const GameProblem& problem);

// Controls at every point (columns) of a batch.
struct PolicyTable {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
};

PolicyTable evaluate_policy(const PolicySnapshot& snapshot,
                            const GameProblem& problem,
                            const Eigen::Ref<const Eigen::VectorXd>& t,
                            const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const EngineOptions& options = {});

// Running cost and drift under a frozen policy; with these the
// evaluation residual is dv/dt + c + grad v . f + 1/2 Tr(a D^2 v).
struct FrozenTerms {
  Eigen::VectorXd c;
  Eigen::MatrixXd f;  // d x n
};

FrozenTerms frozen_terms(const GameProblem& problem,
                         const Eigen::Ref<const Eigen::VectorXd>& t,
                         const Eigen::Ref<const Eigen::MatrixXd>& x,
                         const PolicyTable& policy);

ResidualTerm frozen_residual(const ValueJet& jet, double c, VecRef f);

// Evaluation residual of `state` at one interior point.
double residual(const NetworkState& state, double t, VecRef x,
                const PolicySnapshot& snapshot, const GameProblem& problem,
                ValueForm form = ValueForm::kAnsatz);

// dv/dt + H(t, x, grad v) + 1/2 Tr(a D^2 v); the partial in grad v is
// dH/dp = f(t, x, a*, b*) by the envelope theorem.
ResidualTerm hji_residual(const GameProblem& problem, double t, VecRef x,
                          const ValueJet& jet, SelectorMode mode,
                          const MinimaxConfig& minimax);

struct PITrainConfig {
  int epochs = 1000;   // E, per policy update
  int updates = 1000;  // M
  int resample_interval = 100;
  double tol = 1e-4;
  Eigen::Index collocation = 2000;
  Eigen::Index terminal_points = 0;  // used by the plain form only
  Eigen::Index validation = 2048;
  Eigen::Index residual_samples = 2048;
  std::vector<int> hidden = {64, 64, 64, 64};
  AdamConfig adam;
  ValueForm form = ValueForm::kAnsatz;
  SelectorMode selector = SelectorMode::kClosedForm;
  MinimaxConfig minimax;
  EngineOptions engine{Precision::kFloat32, 1024, 1};
  std::uint64_t seed = 0;
  std::string checkpoint_dir;  // empty: no checkpoints

  void validate() const;

  static PITrainConfig path_planning_defaults();
  static PITrainConfig pubsub_defaults(int n);
};

// Fixed points on [0, T) x target domain for sup-norm estimates.
struct ValidationSet {
  Eigen::VectorXd t;
  Eigen::MatrixXd x;
};

ValidationSet make_validation_set(const GameProblem& problem, Eigen::Index n,
                                  std::uint64_t seed);

Eigen::VectorXd validation_values(const NetworkState& state,
                                  const ValidationSet& set,
                                  const GameProblem& problem, ValueForm form);

double estimate_sup_norm_diff(const NetworkState& a, const NetworkState& b,
                              const ValidationSet& set,
                              const GameProblem& problem,
                              ValueForm form = ValueForm::kAnsatz);

struct ResidualNorm {
  double value = 0.0;
  double standard_error = 0.0;
};

// Monte Carlo estimate of ||R||_{L2([0,T] x target)} of the evaluation
// residual under `snapshot`.
ResidualNorm empirical_residual_norm(const NetworkState& state,
                                     const PolicySnapshot& snapshot,
                                     const GameProblem& problem,
                                     Eigen::Index samples, std::uint64_t seed,
                                     ValueForm form = ValueForm::kAnsatz);

// Mean, standard error and the L2 norm from pointwise residual samples.
ResidualNorm residual_norm_from_samples(const Eigen::VectorXd& r,
                                        double measure);

// E Adam epochs on the frozen-policy loss; the batch is redrawn every
// resample_interval epochs. Returns the loss trace (length E).
std::vector<double> train_policy_evaluation(NetworkState& state,
                                            AdamState& adam,
                                            const PolicySnapshot& snapshot,
                                            const PITrainConfig& config,
                                            const GameProblem& problem,
                                            int iteration = 0);

struct IterationRecord {
  int iteration = 0;
  std::vector<double> loss;
  double residual_norm = 0.0;
  double residual_se = 0.0;
  double sup_diff = 0.0;
  double seconds = 0.0;
  std::string checkpoint;
};

struct IterationHistory {
  std::vector<IterationRecord> records;
  bool converged = false;

  std::size_t size() const { return records.size(); }
  std::vector<double> sup_diffs() const;
};

struct PIObserver {
  std::function<void(int iteration, const NetworkState&)> before_evaluation;
  std::function<void(const IterationRecord&, const NetworkState&)>
      after_iteration;
};

struct PIResult {
  NetworkState state;
  IterationHistory history;
};

PIResult run_policy_iteration(const GameProblem& problem,
                              const PITrainConfig& config,
                              const PIObserver& observer = {});

struct DirectResult {
  NetworkState state;
  std::vector<double> loss;
  double seconds = 0.0;
};

// Minimizes the HJI residual with H substituted directly, for E x M epochs
// on the same resampling schedule.
DirectResult direct_pinn_train(const GameProblem& problem,
                               const PITrainConfig& config);

// CSV columns: iteration, epoch, loss, p_n, sup_diff. The last two are
// filled on the final epoch of each iteration and blank otherwise.
void write_history_csv(const IterationHistory& history, const std::string& path);
void write_loss_csv(const std::vector<double>& loss, const std::string& path);

}  // namespace hjipi

#endif  // HJIPI_PINN_HPP
