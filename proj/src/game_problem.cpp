#include "hjipi/game_problem.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace hjipi {

DiffusionSpec DiffusionSpec::from_sigma(const Eigen::MatrixXd& sigma) {
  if (sigma.rows() != sigma.cols() || sigma.rows() == 0) {
    fail(ErrorCategory::kInvalidArgument, "diffusion: sigma must be square");
  }
  DiffusionSpec spec = from_a(sigma * sigma.transpose());
  spec.sigma = sigma;
  return spec;
}

DiffusionSpec DiffusionSpec::from_a(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    fail(ErrorCategory::kInvalidArgument, "diffusion: a must be square");
  }
  if (!a.allFinite()) {
    fail(ErrorCategory::kNumerical, "diffusion: non-finite entries");
  }
  const double scale = std::max(1.0, a.cwiseAbs().maxCoeff());
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    fail(ErrorCategory::kInvalidArgument, "diffusion: a must be symmetric");
  }
  DiffusionSpec spec;
  spec.a = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(spec.a);
  spec.eigenvalues = solver.eigenvalues();
  spec.eigenvectors = solver.eigenvectors();
  if (spec.eigenvalues.minCoeff() < -1e-12 * scale) {
    fail(ErrorCategory::kInvalidArgument,
         "diffusion: a must be positive semi-definite");
  }
  spec.eigenvalues = spec.eigenvalues.cwiseMax(0.0);
  return spec;
}

void GameProblem::validate() const {
  std::ostringstream why;
  if (dim < 1) why << "dimension must be >= 1; ";
  if (!(horizon > 0.0)) why << "horizon must be > 0; ";
  if (controls_a.dim() < 1 || controls_b.dim() < 1) {
    why << "control sets must be non-empty; ";
  }
  if (!drift || !running_cost || !sigma) why << "missing evaluator; ";
  if (!terminal.value || !terminal.gradient || !terminal.hessian) {
    why << "terminal cost needs value, gradient and hessian; ";
  }
  if (training_domain.dim() != dim || target_domain.dim() != dim) {
    why << "domain dimension mismatch; ";
  } else {
    training_domain.validate();
    target_domain.validate();
  }
  const std::string msg = why.str();
  if (!msg.empty()) {
    fail(ErrorCategory::kInvalidArgument, "problem '" + label + "': " + msg);
  }
}

double lagrangian(const GameProblem& problem, double t, VecRef x, VecRef p,
                  VecRef a, VecRef b) {
  if (!problem.controls_a.contains(a) || !problem.controls_b.contains(b)) {
    fail(ErrorCategory::kInvalidArgument,
         "lagrangian: control outside the admissible set");
  }
  if (x.size() != problem.dim || p.size() != problem.dim) {
    fail(ErrorCategory::kInvalidArgument, "lagrangian: dimension mismatch");
  }
  return problem.running_cost(t, x, a, b) + p.dot(problem.drift(t, x, a, b));
}

double check_ellipticity(const GameProblem& problem, int samples,
                         std::uint64_t seed, double lambda_min) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Box& dom = problem.training_domain;
  double smallest = std::numeric_limits<double>::infinity();
  Eigen::VectorXd x(problem.dim);
  const int n = problem.constant_diffusion ? 1 : samples;
  for (int k = 0; k < n; ++k) {
    const double t = problem.horizon * unit(rng);
    for (int i = 0; i < problem.dim; ++i) {
      x[i] = dom.lower[i] + (dom.upper[i] - dom.lower[i]) * unit(rng);
    }
    const Eigen::MatrixXd s = problem.sigma(t, x);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(s * s.transpose(),
                                                          Eigen::EigenvaluesOnly);
    smallest = std::min(smallest, solver.eigenvalues().minCoeff());
  }
  if (!(smallest > lambda_min)) {
    std::ostringstream msg;
    msg << "problem '" << problem.label
        << "': diffusion is not uniformly elliptic (min eigenvalue "
        << smallest << " <= " << lambda_min << ")";
    fail(ErrorCategory::kNumerical, msg.str());
  }
  return smallest;
}

}  // namespace hjipi
