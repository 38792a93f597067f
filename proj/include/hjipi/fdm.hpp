// Explicit finite-difference reference for two-dimensional viscous HJI
// equations with a closed-form Hamiltonian. Marching backward from g,
//
//   v^n = v^{n+1} + dt [ H(t_{n+1}, x, D_h v^{n+1}) + 1/2 sum_ij a_ij D_ij v^{n+1} ]
//
// with central first differences, the three-point second difference on the
// diagonal and the four-point mixed stencil off it. Homogeneous Neumann
// conditions come from mirrored ghost nodes, v_{-1} = v_1.

#ifndef HJIPI_FDM_HPP
#define HJIPI_FDM_HPP

#include <Eigen/Dense>

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "hjipi/game_problem.hpp"
#include "hjipi/pubsub.hpp"

namespace hjipi {

// Uniform tensor grid with stored time slices. Values are row-major: axis 0
// varies slowest.
struct TimeGrid {
  Box extent;
  std::vector<int> points;  // per axis
  double dt = 0.0;          // integration step
  long steps = 0;           // integration steps taken
  std::vector<double> times;  // ascending
  std::vector<Eigen::VectorXd> slices;

  int dim() const { return static_cast<int>(points.size()); }
  double spacing(int axis) const;
  Eigen::Index num_nodes() const;
  Eigen::Index flat_index(const std::vector<int>& idx) const;
  std::vector<int> unflatten(Eigen::Index flat) const;
  Eigen::VectorXd node(Eigen::Index flat) const;
  // Index of the stored slice at time t, or -1.
  int slice_at(double t, double tol = 1e-12) const;
  void validate() const;
};

struct FDMConfig {
  Box extended;
  Box target;
  int points = 201;          // per axis
  long steps_requested = 0;  // 0: no cap beyond the stability rules
  int saved_slices = 101;    // stored slices including t = 0 and t = T
  double safety = 0.9;       // applied to the advection bound
  double blowup_factor = 1e6;
  int workers = 1;

  void validate() const;

  static FDMConfig path_planning_defaults();
  static FDMConfig pubsub_defaults();
};

// Step size and step count chosen by fdm_solve_2d, exposed for inspection.
struct StepPlan {
  double dx_min = 0.0;
  double dt_dx2 = 0.0;        // min dx^2
  double dt_diffusion = 0.0;  // dx^2 / sum a_ii
  double dt_advection = 0.0;  // lambda_min(a) / max |f|^2
  double dt = 0.0;
  long steps = 0;
  long steps_per_slice = 0;
};

StepPlan plan_steps(const GameProblem& problem, const FDMConfig& config);

TimeGrid fdm_solve_2d(const GameProblem& problem, const FDMConfig& config);

struct RestrictResult {
  TimeGrid grid;
  bool snapped = false;
  std::string report;
};

// Sub-grid on the nodes nearest to the target bounds.
RestrictResult restrict_to_target(const TimeGrid& grid, const Box& target);

enum class TimeInterpolation { kLinear, kNearest };

// Multilinear in space; linear or nearest-slice in time. Throws outside the
// grid extent or time range.
double interpolate(const TimeGrid& grid, double t, VecRef x,
                   TimeInterpolation mode = TimeInterpolation::kLinear);

// Text form: '#' header lines (axes, spacing, dt, steps), then per slice a
// '# t <time>' line followed by rows of the last axis. Binary twin carries
// the same fields. Both round-trip exactly.
void write_grid_csv(const TimeGrid& grid, std::ostream& out);
TimeGrid read_grid_csv(std::istream& in);
void write_grid_binary(const TimeGrid& grid, std::ostream& out);
TimeGrid read_grid_binary(std::istream& in);
void save_grid(const TimeGrid& grid, const std::string& path);  // .bin: binary
TimeGrid load_grid(const std::string& path);

// v(t, x) = sum_{i=1}^{N-1} v_i(t, x_0, x_i) for the isotropic
// publisher-subscriber game, each v_i a 2-D solve of the pair game. Pairs
// with identical diffusion share one solve.
class PairwiseReference {
 public:
  PairwiseReference(PubSubParams params, std::vector<std::shared_ptr<const TimeGrid>> grids);

  int dim() const { return params_.n; }
  const PubSubParams& params() const { return params_; }
  const TimeGrid& pair_grid(int i) const { return *grids_.at(i - 1); }
  double value(double t, VecRef x) const;

 private:
  PubSubParams params_;
  std::vector<std::shared_ptr<const TimeGrid>> grids_;
};

// config covers the pair domain (defaults: [-1.5, 1.5]^2 / [-0.5, 0.5]^2).
PairwiseReference reference_nd_isotropic(const PubSubParams& params,
                                         const FDMConfig& config);

}  // namespace hjipi

#endif  // HJIPI_FDM_HPP
