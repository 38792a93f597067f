// Publisher-subscriber game in R^N: one publisher state x_0 drives N - 1
// subscriber states x_i through unidirectional coupling.
//
//   f(x, u, d) = A x + B u + C d + psi(x)
//   A = e1 e1^T - 1 e1^T + a I,  B = [0; b I],  C = [0; c I]
//   psi(x) = [alpha sin(x_0); -beta x_0 1] o (x o x)
//   g(x) = 1/2 ((N-1) x_0^2 + sum_i x_i^2 - (N-1) r^2)
//   H(x, p) = p^T (A x + psi(x)) - |B^T p|_1 + |C^T p|_1
//
// The l1 form of H is exact when u and d range over the unit box
// [-1, 1]^(N-1), which is how the control sets are built here.

#ifndef HJIPI_PUBSUB_HPP
#define HJIPI_PUBSUB_HPP

#include <Eigen/Dense>

#include <cstdint>

#include "hjipi/game_problem.hpp"

namespace hjipi {

struct PubSubParams {
  int n = 2;
  double a = 1.0;
  double b = 1.0;
  double c = 0.5;
  double alpha = -2.0;
  double beta = 2.0;
  double r = 0.0;
  double noise = 0.1;
  double anisotropy = 0.0;
  std::uint64_t sigma_seed = 0;
  double horizon = 0.5;

  void validate() const;
};

struct PubSubMatrices {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd C;
};

// Dense A, B, C. The evaluators below never materialize these; they exist
// for cross-checking.
PubSubMatrices pubsub_matrices(const PubSubParams& params);

Eigen::VectorXd pubsub_psi(const PubSubParams& params, VecRef x);
Eigen::VectorXd pubsub_drift(const PubSubParams& params, VecRef x, VecRef u,
                             VecRef d);
double pubsub_terminal_cost(const PubSubParams& params, VecRef x);
// g_i(x_0, x_i) = 1/2 (x_0^2 + x_i^2 - r^2), i in 1..N-1.
double pubsub_pairwise_cost(const PubSubParams& params, int i, double x0,
                            double xi);
double pubsub_hamiltonian(const PubSubParams& params, VecRef x, VecRef p);
// u* = -sign(B^T p), d* = sign(C^T p) restricted to the subscriber rows,
// with sign(0) = 0.
ControlPair pubsub_controls(const PubSubParams& params, VecRef p);

// scale I + P where P is symmetric with zero diagonal and off-diagonal
// entries drawn once from U(0, anisotropy). Redraws (bounded) when
// sigma sigma^T has min eigenvalue below 1e-6.
Eigen::MatrixXd build_anisotropic_sigma(int n, double scale, double anisotropy,
                                        std::uint64_t seed);

// Training domain [-1.5, 1.5]^N, target domain [-0.5, 0.5]^N.
GameProblem make_pubsub_problem(const PubSubParams& params);
GameProblem make_pubsub_problem(const PubSubParams& params,
                                const Eigen::MatrixXd& sigma);

// Two-dimensional game on the (x_0, x_i) coordinates: the same dynamics and
// costs restricted to one publisher-subscriber pair, with diffusion given by
// the 2x2 submatrix of sigma on those coordinates.
GameProblem make_pubsub_pair_problem(const PubSubParams& params,
                                     const Eigen::MatrixXd& sigma, int i);

}  // namespace hjipi

#endif  // HJIPI_PUBSUB_HPP
