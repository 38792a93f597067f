#include "hjipi/jet.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

namespace hjipi {

namespace {

using EngineVariant = std::variant<JetEngine<float>, JetEngine<double>>;

EngineVariant make_engine(const NetworkArch& arch, Precision precision) {
  if (precision == Precision::kFloat32) return JetEngine<float>(arch);
  return JetEngine<double>(arch);
}

// Jet of v from the network channels of point j of a chunk starting at
// batch index `offset`.
ValueJet assemble(const JetBatch& batch, Eigen::Index offset,
                  const Eigen::MatrixXd& out, Eigen::Index j) {
  const int d = batch.dim();
  const Eigen::Index p = offset + j;
  const bool ansatz = batch.form == ValueForm::kAnsatz;
  const double tau = ansatz ? batch.horizon - batch.t[p] : 1.0;
  ValueJet jet;
  Eigen::VectorXd coeff = out.col(j).segment(2, d);
  Eigen::VectorXd second = out.col(j).segment(2 + d, d);
  jet.value = tau * out(0, j);
  jet.dv_dt = tau * out(1, j);
  jet.grad_x = tau * (batch.dirs.middleCols(p * d, d) * coeff);
  jet.diff_contract = tau * batch.weights.col(p).dot(second);
  if (ansatz) {
    jet.value += batch.g[p];
    jet.dv_dt -= out(0, j);
    jet.grad_x += batch.grad_g.col(p);
    jet.diff_contract += batch.diff_g[p];
  }
  return jet;
}

// Column j of the channel adjoint for a loss whose derivative in r is
// `weight`, chained through the residual partials and the jet assembly.
void scatter_adjoint(const JetBatch& batch, Eigen::Index offset,
                     const ResidualTerm& term, double weight,
                     Eigen::MatrixXd& adjoint, Eigen::Index j) {
  const int d = batch.dim();
  const Eigen::Index p = offset + j;
  const bool ansatz = batch.form == ValueForm::kAnsatz;
  const double tau = ansatz ? batch.horizon - batch.t[p] : 1.0;
  const double s = weight * tau;
  adjoint(0, j) = s * term.d_value - (ansatz ? weight * term.d_dt : 0.0);
  adjoint(1, j) = s * term.d_dt;
  if (term.d_grad.size() == d) {
    adjoint.col(j).segment(2, d) =
        s * (batch.dirs.middleCols(p * d, d).transpose() * term.d_grad);
  } else {
    adjoint.col(j).segment(2, d).setZero();
  }
  adjoint.col(j).segment(2 + d, d) = s * term.d_diff * batch.weights.col(p);
}

struct ChunkPlan {
  Eigen::Index chunk;
  Eigen::Index count;
  int workers;

  ChunkPlan(Eigen::Index n, const EngineOptions& options)
      : chunk(std::max<Eigen::Index>(1, options.chunk_size)),
        count((n + chunk - 1) / chunk),
        workers(static_cast<int>(
            std::clamp<Eigen::Index>(options.workers, 1, std::max<Eigen::Index>(count, 1)))) {}

  Eigen::Index begin(Eigen::Index c) const { return c * chunk; }
  Eigen::Index size(Eigen::Index c, Eigen::Index n) const {
    return std::min(chunk, n - c * chunk);
  }
  // Chunks owned by worker w: contiguous static blocks.
  std::pair<Eigen::Index, Eigen::Index> owned(int w) const {
    const Eigen::Index block = (count + workers - 1) / workers;
    return {std::min(count, w * block), std::min(count, (w + 1) * block)};
  }
};

void check_finite(const Eigen::MatrixXd& out) {
  if (!out.allFinite()) {
    fail(ErrorCategory::kNumerical, "jet: non-finite network derivatives");
  }
}

}  // namespace

JetBatch JetBatch::slice(Eigen::Index begin, Eigen::Index count) const {
  if (begin < 0 || count < 0 || begin + count > size()) {
    fail(ErrorCategory::kInvalidArgument, "jet batch: slice out of range");
  }
  const int d = dim();
  JetBatch out;
  out.horizon = horizon;
  out.form = form;
  out.t = t.segment(begin, count);
  out.x = x.middleCols(begin, count);
  out.g = g.segment(begin, count);
  out.grad_g = grad_g.middleCols(begin, count);
  out.diff_g = diff_g.segment(begin, count);
  out.dirs = dirs.middleCols(begin * d, count * d);
  out.weights = weights.middleCols(begin, count);
  return out;
}

JetBatch make_jet_batch(Eigen::VectorXd t, Eigen::MatrixXd x,
                        const TerminalCost& terminal, double horizon,
                        const DiffusionAt& diffusion, bool constant_diffusion,
                        ValueForm form) {
  const Eigen::Index B = t.size();
  const int d = static_cast<int>(x.rows());
  if (x.cols() != B || d < 1) {
    fail(ErrorCategory::kInvalidArgument, "jet batch: t and x disagree in size");
  }
  JetBatch batch;
  batch.horizon = horizon;
  batch.form = form;
  batch.g.resize(B);
  batch.grad_g.resize(d, B);
  batch.diff_g.resize(B);
  batch.dirs.resize(d, d * B);
  batch.weights.resize(d, B);
  DiffusionSpec shared;
  if (constant_diffusion && B > 0) shared = diffusion(t[0], x.col(0));
  for (Eigen::Index j = 0; j < B; ++j) {
    const DiffusionSpec spec =
        constant_diffusion ? shared : diffusion(t[j], x.col(j));
    if (spec.a.rows() != d) {
      fail(ErrorCategory::kInvalidArgument, "jet batch: diffusion has wrong size");
    }
    batch.dirs.middleCols(j * d, d) = spec.eigenvectors;
    batch.weights.col(j) = spec.eigenvalues;
    if (form == ValueForm::kAnsatz) {
      batch.g[j] = terminal.value(x.col(j));
      batch.grad_g.col(j) = terminal.gradient(x.col(j));
      const Eigen::MatrixXd hess = terminal.hessian(x.col(j));
      batch.diff_g[j] = spec.a.cwiseProduct(hess.transpose()).sum();
    }
  }
  if (form == ValueForm::kPlain) {
    batch.g.setZero();
    batch.grad_g.setZero();
    batch.diff_g.setZero();
  }
  batch.t = std::move(t);
  batch.x = std::move(x);
  return batch;
}

JetBatch make_jet_batch(const GameProblem& problem, Eigen::VectorXd t,
                        Eigen::MatrixXd x, ValueForm form) {
  const SigmaFn sigma = problem.sigma;
  return make_jet_batch(
      std::move(t), std::move(x), problem.terminal, problem.horizon,
      [sigma](double s, VecRef y) { return DiffusionSpec::from_sigma(sigma(s, y)); },
      problem.constant_diffusion, form);
}

std::vector<ValueJet> evaluate_jets(const NetworkState& state,
                                    const JetBatch& batch,
                                    const EngineOptions& options) {
  const Eigen::Index n = batch.size();
  std::vector<ValueJet> jets(static_cast<std::size_t>(n));
  if (n == 0) return jets;
  const ChunkPlan plan(n, options);
  parallel_for(plan.workers, plan.workers, [&](std::int64_t w) {
    EngineVariant engine = make_engine(state.arch(), options.precision);
    std::visit(
        [&](auto& e) {
          e.load(state);
          const auto [first, end] = plan.owned(static_cast<int>(w));
          for (Eigen::Index c = first; c < end; ++c) {
            const Eigen::Index b = plan.begin(c);
            const Eigen::Index m = plan.size(c, n);
            const int d = batch.dim();
            e.forward(batch.t.segment(b, m), batch.x.middleCols(b, m),
                      batch.dirs.middleCols(b * d, m * d), JetOrder::kSecond);
            const Eigen::MatrixXd out = e.outputs();
            check_finite(out);
            for (Eigen::Index j = 0; j < m; ++j) {
              jets[static_cast<std::size_t>(b + j)] = assemble(batch, b, out, j);
            }
          }
        },
        engine);
  });
  return jets;
}

Eigen::VectorXd evaluate_values(const NetworkState& state,
                                const Eigen::Ref<const Eigen::VectorXd>& t,
                                const Eigen::Ref<const Eigen::MatrixXd>& x,
                                const TerminalCost& terminal, double horizon,
                                ValueForm form, const EngineOptions& options) {
  const Eigen::Index n = t.size();
  if (x.cols() != n) {
    fail(ErrorCategory::kInvalidArgument, "evaluate_values: t and x disagree");
  }
  Eigen::VectorXd values(n);
  if (n == 0) return values;
  const ChunkPlan plan(n, options);
  const Eigen::MatrixXd no_dirs;
  parallel_for(plan.workers, plan.workers, [&](std::int64_t w) {
    EngineVariant engine = make_engine(state.arch(), options.precision);
    std::visit(
        [&](auto& e) {
          e.load(state);
          const auto [first, end] = plan.owned(static_cast<int>(w));
          for (Eigen::Index c = first; c < end; ++c) {
            const Eigen::Index b = plan.begin(c);
            const Eigen::Index m = plan.size(c, n);
            e.forward(t.segment(b, m), x.middleCols(b, m), no_dirs,
                      JetOrder::kValue);
            const Eigen::MatrixXd out = e.outputs();
            check_finite(out);
            for (Eigen::Index j = 0; j < m; ++j) {
              const Eigen::Index p = b + j;
              values[p] = form == ValueForm::kAnsatz
                              ? terminal.value(x.col(p)) + (horizon - t[p]) * out(0, j)
                              : out(0, j);
            }
          }
        },
        engine);
  });
  return values;
}

ValueJet value_jet(const NetworkState& state, double t, VecRef x,
                   const Eigen::MatrixXd& a_mat, const TerminalCost& terminal,
                   double horizon, ValueForm form) {
  const DiffusionSpec spec = DiffusionSpec::from_a(a_mat);
  Eigen::VectorXd ts(1);
  ts[0] = t;
  JetBatch batch = make_jet_batch(
      ts, Eigen::MatrixXd(x), terminal, horizon,
      [&spec](double, VecRef) { return spec; }, true, form);
  return evaluate_jets(state, batch)[0];
}

struct LossEvaluator::Impl {
  std::vector<EngineVariant> engines;
  std::vector<double> chunk_loss;
  std::vector<Eigen::VectorXd> chunk_grad;
};

LossEvaluator::LossEvaluator(const NetworkArch& arch, EngineOptions options)
    : options_(options), impl_(std::make_unique<Impl>()) {
  arch.validate();
  const int workers = std::max(1, options_.workers);
  for (int w = 0; w < workers; ++w) {
    impl_->engines.push_back(make_engine(arch, options_.precision));
  }
}

LossEvaluator::~LossEvaluator() = default;
LossEvaluator::LossEvaluator(LossEvaluator&&) noexcept = default;
LossEvaluator& LossEvaluator::operator=(LossEvaluator&&) noexcept = default;

LossGradient LossEvaluator::evaluate(const NetworkState& state,
                                     const JetBatch& batch,
                                     const ResidualFn& residual,
                                     const TerminalPenalty* penalty) {
  const Eigen::Index n = batch.size();
  if (n == 0) fail(ErrorCategory::kInvalidArgument, "loss: empty batch");
  const Eigen::Index np = state.arch().num_params();
  const ChunkPlan plan(n, options_);
  impl_->chunk_loss.assign(static_cast<std::size_t>(plan.count), 0.0);
  impl_->chunk_grad.resize(static_cast<std::size_t>(plan.count));
  const double inv_n = 1.0 / static_cast<double>(n);
  const int d = batch.dim();

  parallel_for(plan.workers, plan.workers, [&](std::int64_t w) {
    std::visit(
        [&](auto& e) {
          e.load(state);
          const auto [first, end] = plan.owned(static_cast<int>(w));
          for (Eigen::Index c = first; c < end; ++c) {
            const Eigen::Index b = plan.begin(c);
            const Eigen::Index m = plan.size(c, n);
            e.forward(batch.t.segment(b, m), batch.x.middleCols(b, m),
                      batch.dirs.middleCols(b * d, m * d), JetOrder::kSecond);
            const Eigen::MatrixXd out = e.outputs();
            check_finite(out);
            Eigen::MatrixXd adjoint(out.rows(), m);
            double loss = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
              const ValueJet jet = assemble(batch, b, out, j);
              const ResidualTerm term = residual(b + j, jet);
              loss += term.r * term.r;
              scatter_adjoint(batch, b, term, 2.0 * term.r * inv_n, adjoint, j);
            }
            Eigen::VectorXd& g = impl_->chunk_grad[static_cast<std::size_t>(c)];
            g.setZero(np);
            e.backward(adjoint, g);
            impl_->chunk_loss[static_cast<std::size_t>(c)] = loss;
          }
        },
        impl_->engines[static_cast<std::size_t>(w)]);
  });

  LossGradient result;
  result.grad.setZero(np);
  double total = 0.0;
  for (Eigen::Index c = 0; c < plan.count; ++c) {
    total += impl_->chunk_loss[static_cast<std::size_t>(c)];
    result.grad += impl_->chunk_grad[static_cast<std::size_t>(c)];
  }
  result.loss = total * inv_n;

  if (penalty != nullptr && penalty->x.cols() > 0) {
    const Eigen::Index nb = penalty->x.cols();
    if (penalty->g.size() != nb || penalty->x.rows() != d) {
      fail(ErrorCategory::kInvalidArgument, "loss: terminal penalty shape");
    }
    const Eigen::VectorXd tT = Eigen::VectorXd::Constant(nb, batch.horizon);
    const Eigen::MatrixXd no_dirs;
    std::visit(
        [&](auto& e) {
          e.forward(tT, penalty->x, no_dirs, JetOrder::kValue);
          const Eigen::MatrixXd out = e.outputs();
          check_finite(out);
          // Under the ansatz v(T, x) = g(x) and the network does not enter.
          if (batch.form == ValueForm::kAnsatz) return;
          const Eigen::VectorXd err = out.row(0).transpose() - penalty->g;
          result.loss += err.squaredNorm() / static_cast<double>(nb);
          const Eigen::MatrixXd adjoint =
              (2.0 / static_cast<double>(nb)) * err.transpose();
          e.backward(adjoint, result.grad);
        },
        impl_->engines[0]);
  }
  if (!std::isfinite(result.loss) || !result.grad.allFinite()) {
    fail(ErrorCategory::kNumerical, "loss: non-finite loss or gradient");
  }
  return result;
}

LossGradient loss_param_gradient(const NetworkState& state,
                                 const JetBatch& batch,
                                 const ResidualFn& residual,
                                 const EngineOptions& options) {
  LossEvaluator evaluator(state.arch(), options);
  return evaluator.evaluate(state, batch, residual);
}

}  // namespace hjipi
