// Two-player zero-sum stochastic differential game on [0, T] x R^d:
//
//   dX = f(s, X, a, b) ds + sigma(s, X) dW,   a in A (minimizer), b in B,
//   cost  E[ int c(s, X, a, b) ds + g(X_T) ],
//
// with Lagrangian L(t, x, p)(a, b) = c(t, x, a, b) + p . f(t, x, a, b) and
// Hamiltonian H(t, x, p) = sup_b inf_a L.

#ifndef HJIPI_GAME_PROBLEM_HPP
#define HJIPI_GAME_PROBLEM_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>

#include "hjipi/common.hpp"
#include "hjipi/control_set.hpp"

namespace hjipi {

using VecRef = Eigen::Ref<const Eigen::VectorXd>;

struct ControlPair {
  Eigen::VectorXd a;
  Eigen::VectorXd b;
};

using DriftFn =
    std::function<Eigen::VectorXd(double t, VecRef x, VecRef a, VecRef b)>;
using RunningCostFn =
    std::function<double(double t, VecRef x, VecRef a, VecRef b)>;
using SigmaFn = std::function<Eigen::MatrixXd(double t, VecRef x)>;
using HamiltonianFn = std::function<double(double t, VecRef x, VecRef p)>;
using SelectorFn = std::function<ControlPair(double t, VecRef x, VecRef p)>;

// g together with its first and second derivatives. The network ansatz
// needs all three to form exact jets of the value function.
struct TerminalCost {
  std::function<double(VecRef)> value;
  std::function<Eigen::VectorXd(VecRef)> gradient;
  std::function<Eigen::MatrixXd(VecRef)> hessian;
};

// a = sigma sigma^T with its spectral decomposition a = U diag(w) U^T.
struct DiffusionSpec {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd a;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;

  static DiffusionSpec from_sigma(const Eigen::MatrixXd& sigma);
  // Accepts any symmetric positive semi-definite a directly.
  static DiffusionSpec from_a(const Eigen::MatrixXd& a);

  double min_eigenvalue() const { return eigenvalues.minCoeff(); }
};

struct GameProblem {
  std::string label;
  int dim = 0;
  double horizon = 0.0;
  ControlSet controls_a;
  ControlSet controls_b;

  DriftFn drift;
  RunningCostFn running_cost;
  TerminalCost terminal;
  SigmaFn sigma;
  // sigma independent of (t, x); lets callers factor a once.
  bool constant_diffusion = false;

  // Optional closed forms. Empty when the problem has none.
  HamiltonianFn hamiltonian;
  SelectorFn selector;

  // Collocation domain for training and the smaller domain used by metrics.
  Box training_domain;
  Box target_domain;

  bool has_closed_form_hamiltonian() const {
    return static_cast<bool>(hamiltonian);
  }
  bool has_closed_form_selector() const { return static_cast<bool>(selector); }

  // Structural checks: d >= 1, T > 0, evaluators present, domains valid.
  void validate() const;
};

// c + p . f after checking that (a, b) is admissible.
double lagrangian(const GameProblem& problem, double t, VecRef x, VecRef p,
                  VecRef a, VecRef b);

// Samples (t, x) uniformly over [0, T] x training_domain and returns the
// smallest eigenvalue of sigma sigma^T seen. Throws a numerical error when it
// falls below lambda_min.
double check_ellipticity(const GameProblem& problem, int samples,
                         std::uint64_t seed, double lambda_min);

}  // namespace hjipi

#endif  // HJIPI_GAME_PROBLEM_HPP
