// Planar path planning around a moving Gaussian obstacle.
//
//   dX = (a + b) ds + s I dW,  |a| <= 1 (robot), |b| <= delta (disturbance)
//   c(t, x, a, b) = lambda1 |a|^2 + lambda2 phi(t, x)
//   g(x)          = lambda3 |x - goal|^2
//   phi(t, x)     = exp(-|x - x_obs(t)|^2 / (2 eps^2)),
//   x_obs(t)      = 0.5 (cos(pi t), sin(pi t)).

#ifndef HJIPI_PATH_PLANNING_HPP
#define HJIPI_PATH_PLANNING_HPP

#include <Eigen/Dense>

#include "hjipi/game_problem.hpp"

namespace hjipi {

struct PathPlanningParams {
  double lambda1 = 0.1;
  double lambda2 = 100.0;
  double lambda3 = 10.0;
  double delta = 0.1;
  double epsilon = 0.3;
  Eigen::Vector2d goal{0.9, 0.9};
  double noise = 0.1;
  double horizon = 1.0;

  void validate() const;
};

Eigen::Vector2d obstacle_center(double s);

double obstacle_penalty(const PathPlanningParams& params, double s, VecRef x);

double path_planning_hamiltonian(const PathPlanningParams& params, double t,
                                 VecRef x, VecRef p);

// Minimizer of lambda1 |a|^2 + p . a over the unit disc.
Eigen::VectorXd path_planning_optimal_control(const PathPlanningParams& params,
                                              VecRef p);

// Maximizer of p . b over |b| <= delta; zero when p = 0.
Eigen::VectorXd disturbance_optimal(VecRef p, double delta);

// Training domain [-1, 1]^2, target domain [-1, 1]^2.
GameProblem make_path_planning_problem(const PathPlanningParams& params);

}  // namespace hjipi

#endif  // HJIPI_PATH_PLANNING_HPP
