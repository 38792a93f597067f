#include <bit>
#include <cmath>
#include <random>

#include "hjipi/pinn.hpp"

namespace hjipi {

namespace {

std::uint64_t point_seed(std::uint64_t seed, double t, VecRef x) {
  std::uint64_t h = mix_seed(seed, std::bit_cast<std::uint64_t>(t));
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    h = mix_seed(h, std::bit_cast<std::uint64_t>(x[i]));
  }
  return h;
}

ControlPair uniform_controls(std::uint64_t seed, double t, VecRef x,
                             const GameProblem& problem) {
  std::mt19937_64 rng(point_seed(seed, t, x));
  ControlPair out;
  out.a = problem.controls_a.sample_uniform(rng);
  out.b = problem.controls_b.sample_uniform(rng);
  return out;
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, SeedStream stream,
                          std::uint64_t a, std::uint64_t b) {
  return derive_seed(seed, static_cast<std::uint64_t>(stream), a, b);
}

CollocationBatch sample_collocation(const Box& domain, double horizon,
                                    Eigen::Index n, std::uint64_t seed,
                                    Eigen::Index n_terminal) {
  domain.validate();
  if (n <= 0 || n_terminal < 0) {
    fail(ErrorCategory::kInvalidArgument, "collocation: need n > 0");
  }
  if (!(horizon > 0.0)) {
    fail(ErrorCategory::kInvalidArgument, "collocation: need T > 0");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int d = domain.dim();
  const double t_max = std::nextafter(horizon, 0.0);
  CollocationBatch batch;
  batch.t.resize(n);
  batch.x.resize(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    batch.t[j] = std::min(horizon * unit(rng), t_max);
    for (int i = 0; i < d; ++i) {
      batch.x(i, j) = domain.lower[i] + (domain.upper[i] - domain.lower[i]) * unit(rng);
    }
  }
  batch.terminal_x.resize(d, n_terminal);
  for (Eigen::Index j = 0; j < n_terminal; ++j) {
    for (int i = 0; i < d; ++i) {
      batch.terminal_x(i, j) =
          domain.lower[i] + (domain.upper[i] - domain.lower[i]) * unit(rng);
    }
  }
  return batch;
}

PolicySnapshot PolicySnapshot::uniform(std::uint64_t seed) {
  PolicySnapshot s;
  s.seed = seed;
  return s;
}

PolicySnapshot PolicySnapshot::frozen(const NetworkState& state, ValueForm form,
                                      SelectorMode mode, MinimaxConfig minimax) {
  PolicySnapshot s;
  s.state = std::make_shared<const NetworkState>(state);
  s.form = form;
  s.mode = mode;
  s.minimax = minimax;
  return s;
}

ControlPair select_controls(const GameProblem& problem, SelectorMode mode,
                            const MinimaxConfig& minimax, double t, VecRef x,
                            VecRef p) {
  ControlPair out;
  if (mode == SelectorMode::kClosedForm && problem.has_closed_form_selector()) {
    out = problem.selector(t, x, p);
  } else {
    out = numeric_minimax(problem, t, x, p, minimax).controls;
  }
  out.a = problem.controls_a.project(out.a);
  out.b = problem.controls_b.project(out.b);
  return out;
}

PolicyTable evaluate_policy(const PolicySnapshot& snapshot,
                            const GameProblem& problem,
                            const Eigen::Ref<const Eigen::VectorXd>& t,
                            const Eigen::Ref<const Eigen::MatrixXd>& x,
                            const EngineOptions& options) {
  const Eigen::Index n = t.size();
  if (x.rows() != problem.dim || x.cols() != n) {
    fail(ErrorCategory::kInvalidArgument, "policy: batch has wrong shape");
  }
  PolicyTable table;
  table.a.resize(problem.controls_a.dim(), n);
  table.b.resize(problem.controls_b.dim(), n);
  if (snapshot.is_uniform()) {
    for (Eigen::Index j = 0; j < n; ++j) {
      ControlPair c = uniform_controls(snapshot.seed, t[j], x.col(j), problem);
      table.a.col(j) = c.a;
      table.b.col(j) = c.b;
    }
    return table;
  }
  const JetBatch batch = make_jet_batch(problem, t, x, snapshot.form);
  const std::vector<ValueJet> jets = evaluate_jets(*snapshot.state, batch, options);
  parallel_for(n, options.workers, [&](std::int64_t j) {
    ControlPair c = select_controls(problem, snapshot.mode, snapshot.minimax,
                                    t[j], x.col(j), jets[j].grad_x);
    table.a.col(j) = c.a;
    table.b.col(j) = c.b;
  });
  return table;
}

ControlPair policy_improvement(const PolicySnapshot& snapshot, double t,
                               VecRef x, const GameProblem& problem) {
  Eigen::VectorXd ts(1);
  ts[0] = t;
  PolicyTable table = evaluate_policy(snapshot, problem, ts, Eigen::MatrixXd(x));
  return {table.a.col(0), table.b.col(0)};
}

FrozenTerms frozen_terms(const GameProblem& problem,
                         const Eigen::Ref<const Eigen::VectorXd>& t,
                         const Eigen::Ref<const Eigen::MatrixXd>& x,
                         const PolicyTable& policy) {
  const Eigen::Index n = t.size();
  FrozenTerms terms;
  terms.c.resize(n);
  terms.f.resize(problem.dim, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    terms.c[j] = problem.running_cost(t[j], x.col(j), policy.a.col(j), policy.b.col(j));
    terms.f.col(j) = problem.drift(t[j], x.col(j), policy.a.col(j), policy.b.col(j));
  }
  return terms;
}

ResidualTerm frozen_residual(const ValueJet& jet, double c, VecRef f) {
  ResidualTerm r;
  r.r = jet.dv_dt + c + jet.grad_x.dot(f) + 0.5 * jet.diff_contract;
  r.d_dt = 1.0;
  r.d_grad = f;
  r.d_diff = 0.5;
  return r;
}

double residual(const NetworkState& state, double t, VecRef x,
                const PolicySnapshot& snapshot, const GameProblem& problem,
                ValueForm form) {
  Eigen::VectorXd ts(1);
  ts[0] = t;
  const Eigen::MatrixXd xs = x;
  const ControlPair c = policy_improvement(snapshot, t, x, problem);
  const JetBatch batch = make_jet_batch(problem, ts, xs, form);
  const ValueJet jet = evaluate_jets(state, batch)[0];
  if (!std::isfinite(jet.value) || !jet.grad_x.allFinite()) {
    fail(ErrorCategory::kNumerical, "residual: non-finite jet");
  }
  return frozen_residual(jet, problem.running_cost(t, x, c.a, c.b),
                         problem.drift(t, x, c.a, c.b))
      .r;
}

ResidualTerm hji_residual(const GameProblem& problem, double t, VecRef x,
                          const ValueJet& jet, SelectorMode mode,
                          const MinimaxConfig& minimax) {
  const ControlPair c = select_controls(problem, mode, minimax, t, x, jet.grad_x);
  const Eigen::VectorXd f = problem.drift(t, x, c.a, c.b);
  const double h = problem.has_closed_form_hamiltonian()
                       ? problem.hamiltonian(t, x, jet.grad_x)
                       : problem.running_cost(t, x, c.a, c.b) + jet.grad_x.dot(f);
  ResidualTerm r;
  r.r = jet.dv_dt + h + 0.5 * jet.diff_contract;
  r.d_dt = 1.0;
  r.d_grad = f;
  r.d_diff = 0.5;
  return r;
}

}  // namespace hjipi
