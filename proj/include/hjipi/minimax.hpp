// Generic feedback selector for problems without closed forms:
//
//   b* = argmax_b min_a L(t, x, p)(a, b),   a* = argmin_a L(t, x, p)(a, b*).
//
// Both stages run projected gradient iterations with Barzilai-Borwein step
// lengths. The outer ascent uses the Danskin gradient dL/db at the inner
// minimizer. Gradients are central differences of L.

#ifndef HJIPI_MINIMAX_HPP
#define HJIPI_MINIMAX_HPP

#include "hjipi/game_problem.hpp"

namespace hjipi {

struct MinimaxConfig {
  double step = 0.05;  // initial step length
  int max_iterations = 200;
  double tolerance = 1e-6;  // on iterate movement
  double fd_step = 1e-6;

  void validate() const;
};

struct MinimaxResult {
  ControlPair controls;
  int outer_iterations = 0;
  bool converged = false;
};

// Starts both players at the set centers, so a zero gradient returns the
// centers. Non-convergence is reported, never thrown; the last iterate is
// returned and is always admissible.
MinimaxResult numeric_minimax(const GameProblem& problem, double t, VecRef x,
                              VecRef p, const MinimaxConfig& config = {});

}  // namespace hjipi

#endif  // HJIPI_MINIMAX_HPP
