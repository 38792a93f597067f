#include "hjipi/path_planning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace hjipi {

void PathPlanningParams::validate() const {
  if (!(lambda1 > 0.0)) {
    fail(ErrorCategory::kInvalidArgument, "path planning: lambda1 must be > 0");
  }
  if (lambda2 < 0.0 || lambda3 < 0.0) {
    fail(ErrorCategory::kInvalidArgument,
         "path planning: lambda2, lambda3 must be >= 0");
  }
  if (!(epsilon > 0.0)) {
    fail(ErrorCategory::kInvalidArgument, "path planning: epsilon must be > 0");
  }
  if (delta < 0.0) {
    fail(ErrorCategory::kInvalidArgument, "path planning: delta must be >= 0");
  }
  if (!(noise > 0.0) || !(horizon > 0.0)) {
    fail(ErrorCategory::kInvalidArgument,
         "path planning: noise and horizon must be > 0");
  }
}

Eigen::Vector2d obstacle_center(double s) {
  return {0.5 * std::cos(std::numbers::pi * s),
          0.5 * std::sin(std::numbers::pi * s)};
}

double obstacle_penalty(const PathPlanningParams& params, double s, VecRef x) {
  const Eigen::Vector2d c = obstacle_center(s);
  const double dx = x[0] - c[0];
  const double dy = x[1] - c[1];
  return std::exp(-(dx * dx + dy * dy) /
                  (2.0 * params.epsilon * params.epsilon));
}

double path_planning_hamiltonian(const PathPlanningParams& params, double t,
                                 VecRef x, VecRef p) {
  const double np = p.norm();
  const double l1 = params.lambda1;
  const double obstacle = params.lambda2 * obstacle_penalty(params, t, x);
  const double robot =
      np <= 2.0 * l1 ? -np * np / (4.0 * l1) : -np + l1;
  return robot + obstacle + params.delta * np;
}

Eigen::VectorXd path_planning_optimal_control(const PathPlanningParams& params,
                                              VecRef p) {
  Eigen::VectorXd a = -p / (2.0 * params.lambda1);
  const double n = a.norm();
  if (n <= 1.0) return a;
  return -p / p.norm();
}

Eigen::VectorXd disturbance_optimal(VecRef p, double delta) {
  const double n = p.norm();
  if (n == 0.0) return Eigen::VectorXd::Zero(p.size());
  return p * (delta / n);
}

GameProblem make_path_planning_problem(const PathPlanningParams& params) {
  params.validate();
  GameProblem problem;
  problem.label = "path_planning";
  problem.dim = 2;
  problem.horizon = params.horizon;
  problem.controls_a = ControlSet::ball(2, 1.0);
  // delta = 0 degenerates B to {0}; keep a representable positive radius.
  problem.controls_b = ControlSet::ball(
      2, std::max(params.delta, std::numeric_limits<double>::min()));

  problem.drift = [](double, VecRef, VecRef a, VecRef b) -> Eigen::VectorXd {
    return a + b;
  };
  problem.running_cost = [params](double t, VecRef x, VecRef a, VecRef) {
    return params.lambda1 * a.squaredNorm() +
           params.lambda2 * obstacle_penalty(params, t, x);
  };
  const Eigen::Vector2d goal = params.goal;
  const double l3 = params.lambda3;
  problem.terminal.value = [goal, l3](VecRef x) {
    return l3 * (x - goal).squaredNorm();
  };
  problem.terminal.gradient = [goal, l3](VecRef x) -> Eigen::VectorXd {
    return 2.0 * l3 * (x - goal);
  };
  problem.terminal.hessian = [l3](VecRef) -> Eigen::MatrixXd {
    return 2.0 * l3 * Eigen::Matrix2d::Identity();
  };
  const Eigen::Matrix2d sigma = params.noise * Eigen::Matrix2d::Identity();
  problem.sigma = [sigma](double, VecRef) -> Eigen::MatrixXd { return sigma; };
  problem.constant_diffusion = true;

  problem.hamiltonian = [params](double t, VecRef x, VecRef p) {
    return path_planning_hamiltonian(params, t, x, p);
  };
  problem.selector = [params](double, VecRef, VecRef p) {
    return ControlPair{path_planning_optimal_control(params, p),
                       disturbance_optimal(p, params.delta)};
  };
  problem.training_domain = Box::cube(2, -1.0, 1.0);
  problem.target_domain = Box::cube(2, -1.0, 1.0);
  return problem;
}

}  // namespace hjipi
