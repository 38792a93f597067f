#include "hjipi/minimax.hpp"

#include <algorithm>
#include <cmath>

namespace hjipi {

namespace {

constexpr double kMaxStep = 1e8;

struct StageResult {
  Eigen::VectorXd u;
  bool converged = false;
};

template <typename Fn>
Eigen::VectorXd central_gradient(const Fn& f, const Eigen::VectorXd& u,
                                 double h) {
  Eigen::VectorXd g(u.size());
  Eigen::VectorXd w = u;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    w[i] = u[i] + h;
    const double fp = f(w);
    w[i] = u[i] - h;
    const double fm = f(w);
    w[i] = u[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

// Projected gradient descent on `set` from its center; `gradient` is the
// gradient of the objective being minimized.
template <typename Grad>
StageResult projected_descent(const ControlSet& set, const Grad& gradient,
                              const MinimaxConfig& cfg) {
  StageResult r;
  r.u = set.center();
  Eigen::VectorXd g = gradient(r.u);
  double step = cfg.step;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    Eigen::VectorXd next = set.project(r.u - step * g);
    const Eigen::VectorXd s = next - r.u;
    r.u = std::move(next);
    if (s.norm() < cfg.tolerance) {
      r.converged = true;
      break;
    }
    const Eigen::VectorXd g_next = gradient(r.u);
    const double sy = s.dot(g_next - g);
    // Curvature-free directions (linear objectives) get a growing step so
    // the iterate reaches the boundary quickly.
    step = sy > 1e-14 * s.squaredNorm() ? s.squaredNorm() / sy : 2.0 * step;
    step = std::clamp(step, 1e-12, kMaxStep);
    g = g_next;
  }
  return r;
}

}  // namespace

void MinimaxConfig::validate() const {
  if (!(step > 0.0) || max_iterations <= 0 || !(tolerance > 0.0) ||
      !(fd_step > 0.0)) {
    fail(ErrorCategory::kInvalidArgument,
         "minimax: step, tolerance, fd_step > 0 and max_iterations > 0 required");
  }
}

MinimaxResult numeric_minimax(const GameProblem& problem, double t, VecRef x,
                              VecRef p, const MinimaxConfig& config) {
  config.validate();
  if (x.size() != problem.dim || p.size() != problem.dim) {
    fail(ErrorCategory::kInvalidArgument, "minimax: dimension mismatch");
  }
  auto L = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return problem.running_cost(t, x, a, b) + p.dot(problem.drift(t, x, a, b));
  };
  bool inner_ok = true;
  auto best_response = [&](const Eigen::VectorXd& b) {
    StageResult s = projected_descent(
        problem.controls_a,
        [&](const Eigen::VectorXd& a) {
          return central_gradient([&](const Eigen::VectorXd& u) { return L(u, b); },
                                  a, config.fd_step);
        },
        config);
    inner_ok = inner_ok && s.converged;
    return s.u;
  };
  int outer_calls = 0;
  // Danskin: d/db min_a L(a, b) = dL/db at a*(b).
  StageResult outer = projected_descent(
      problem.controls_b,
      [&](const Eigen::VectorXd& b) {
        ++outer_calls;
        const Eigen::VectorXd a = best_response(b);
        return Eigen::VectorXd(
            -central_gradient([&](const Eigen::VectorXd& v) { return L(a, v); },
                              b, config.fd_step));
      },
      config);
  MinimaxResult result;
  result.controls = {best_response(outer.u), outer.u};
  result.outer_iterations = outer_calls;
  result.converged = outer.converged && inner_ok;
  return result;
}

}  // namespace hjipi
