#include "hjipi/pubsub.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace hjipi {

namespace {

constexpr double kMinSigmaEigenvalue = 1e-6;
constexpr int kMaxSigmaDraws = 64;

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_size(const PubSubParams& params, VecRef v, const char* what) {
  if (v.size() != params.n) {
    std::ostringstream msg;
    msg << "pubsub: " << what << " has size " << v.size() << ", expected "
        << params.n;
    fail(ErrorCategory::kInvalidArgument, msg.str());
  }
}

}  // namespace

void PubSubParams::validate() const {
  if (n < 2) fail(ErrorCategory::kInvalidArgument, "pubsub: N must be >= 2");
  if (!(noise > 0.0) || anisotropy < 0.0 || !(horizon > 0.0)) {
    fail(ErrorCategory::kInvalidArgument,
         "pubsub: noise > 0, anisotropy >= 0 and horizon > 0 required");
  }
}

PubSubMatrices pubsub_matrices(const PubSubParams& params) {
  params.validate();
  const int n = params.n;
  PubSubMatrices m;
  Eigen::VectorXd e1 = Eigen::VectorXd::Unit(n, 0);
  m.A = e1 * e1.transpose() - Eigen::VectorXd::Ones(n) * e1.transpose() +
        params.a * Eigen::MatrixXd::Identity(n, n);
  m.B = Eigen::MatrixXd::Zero(n, n - 1);
  m.B.bottomRows(n - 1) = params.b * Eigen::MatrixXd::Identity(n - 1, n - 1);
  m.C = Eigen::MatrixXd::Zero(n, n - 1);
  m.C.bottomRows(n - 1) = params.c * Eigen::MatrixXd::Identity(n - 1, n - 1);
  return m;
}

Eigen::VectorXd pubsub_psi(const PubSubParams& params, VecRef x) {
  check_size(params, x, "x");
  Eigen::VectorXd psi(params.n);
  const double x0 = x[0];
  psi[0] = params.alpha * std::sin(x0) * x0 * x0;
  psi.tail(params.n - 1) =
      -params.beta * x0 * x.tail(params.n - 1).array().square().matrix();
  return psi;
}

Eigen::VectorXd pubsub_drift(const PubSubParams& params, VecRef x, VecRef u,
                             VecRef d) {
  check_size(params, x, "x");
  if (u.size() != params.n - 1 || d.size() != params.n - 1) {
    fail(ErrorCategory::kInvalidArgument,
         "pubsub: controls must have size N - 1");
  }
  Eigen::VectorXd f = pubsub_psi(params, x);
  const double x0 = x[0];
  f[0] += params.a * x0;
  f.tail(params.n - 1).array() += -x0 + params.a * x.tail(params.n - 1).array() +
                                  params.b * u.array() + params.c * d.array();
  return f;
}

double pubsub_terminal_cost(const PubSubParams& params, VecRef x) {
  check_size(params, x, "x");
  const double m = params.n - 1;
  return 0.5 * (m * x[0] * x[0] + x.tail(params.n - 1).squaredNorm() -
                m * params.r * params.r);
}

double pubsub_pairwise_cost(const PubSubParams& params, int i, double x0,
                            double xi) {
  if (i < 1 || i >= params.n) {
    fail(ErrorCategory::kInvalidArgument, "pubsub: pair index out of range");
  }
  return 0.5 * (x0 * x0 + xi * xi - params.r * params.r);
}

double pubsub_hamiltonian(const PubSubParams& params, VecRef x, VecRef p) {
  check_size(params, x, "x");
  check_size(params, p, "p");
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(params.n - 1);
  const Eigen::VectorXd f0 = pubsub_drift(params, x, zero, zero);
  const double tail_l1 = p.tail(params.n - 1).cwiseAbs().sum();
  return p.dot(f0) - std::abs(params.b) * tail_l1 +
         std::abs(params.c) * tail_l1;
}

ControlPair pubsub_controls(const PubSubParams& params, VecRef p) {
  check_size(params, p, "p");
  ControlPair out{Eigen::VectorXd(params.n - 1), Eigen::VectorXd(params.n - 1)};
  for (int i = 1; i < params.n; ++i) {
    out.a[i - 1] = -sign0(params.b * p[i]);
    out.b[i - 1] = sign0(params.c * p[i]);
  }
  return out;
}

Eigen::MatrixXd build_anisotropic_sigma(int n, double scale, double anisotropy,
                                        std::uint64_t seed) {
  if (n < 1 || !(scale > 0.0) || anisotropy < 0.0) {
    fail(ErrorCategory::kInvalidArgument,
         "anisotropic sigma: need n >= 1, scale > 0, anisotropy >= 0");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offdiag(0.0, anisotropy);
  for (int draw = 0; draw < kMaxSigmaDraws; ++draw) {
    Eigen::MatrixXd sigma = scale * Eigen::MatrixXd::Identity(n, n);
    if (anisotropy > 0.0) {
      for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
          sigma(i, j) = sigma(j, i) = offdiag(rng);
        }
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        sigma * sigma.transpose(), Eigen::EigenvaluesOnly);
    if (solver.eigenvalues().minCoeff() >= kMinSigmaEigenvalue) return sigma;
  }
  fail(ErrorCategory::kNumerical,
       "anisotropic sigma: degenerate diffusion after bounded resampling");
}

GameProblem make_pubsub_problem(const PubSubParams& params) {
  params.validate();
  return make_pubsub_problem(
      params, build_anisotropic_sigma(params.n, params.noise,
                                      params.anisotropy, params.sigma_seed));
}

GameProblem make_pubsub_problem(const PubSubParams& params,
                                const Eigen::MatrixXd& sigma) {
  params.validate();
  if (sigma.rows() != params.n || sigma.cols() != params.n) {
    fail(ErrorCategory::kInvalidArgument, "pubsub: sigma must be N x N");
  }
  const int n = params.n;
  GameProblem problem;
  problem.label = "pubsub";
  problem.dim = n;
  problem.horizon = params.horizon;
  problem.controls_a = ControlSet::unit_box(n - 1);
  problem.controls_b = ControlSet::unit_box(n - 1);
  problem.drift = [params](double, VecRef x, VecRef u, VecRef d) {
    return pubsub_drift(params, x, u, d);
  };
  problem.running_cost = [](double, VecRef, VecRef, VecRef) { return 0.0; };
  problem.terminal.value = [params](VecRef x) {
    return pubsub_terminal_cost(params, x);
  };
  problem.terminal.gradient = [params](VecRef x) -> Eigen::VectorXd {
    Eigen::VectorXd g = x;
    g[0] *= params.n - 1;
    return g;
  };
  problem.terminal.hessian = [params](VecRef) -> Eigen::MatrixXd {
    Eigen::MatrixXd h = Eigen::MatrixXd::Identity(params.n, params.n);
    h(0, 0) = params.n - 1;
    return h;
  };
  problem.sigma = [sigma](double, VecRef) -> Eigen::MatrixXd { return sigma; };
  problem.constant_diffusion = true;
  problem.hamiltonian = [params](double, VecRef x, VecRef p) {
    return pubsub_hamiltonian(params, x, p);
  };
  problem.selector = [params](double, VecRef, VecRef p) {
    return pubsub_controls(params, p);
  };
  problem.training_domain = Box::cube(n, -1.5, 1.5);
  problem.target_domain = Box::cube(n, -0.5, 0.5);
  return problem;
}

GameProblem make_pubsub_pair_problem(const PubSubParams& params,
                                     const Eigen::MatrixXd& sigma, int i) {
  if (i < 1 || i >= params.n) {
    fail(ErrorCategory::kInvalidArgument, "pubsub: pair index out of range");
  }
  if (sigma.rows() != params.n || sigma.cols() != params.n) {
    fail(ErrorCategory::kInvalidArgument, "pubsub: sigma must be N x N");
  }
  Eigen::Matrix2d sub;
  sub << sigma(0, 0), sigma(0, i), sigma(i, 0), sigma(i, i);
  PubSubParams pair = params;
  pair.n = 2;
  GameProblem problem = make_pubsub_problem(pair, sub);
  problem.label = "pubsub_pair_" + std::to_string(i);
  return problem;
}

}  // namespace hjipi
