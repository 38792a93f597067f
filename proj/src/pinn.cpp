#include "hjipi/pinn.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "format.hpp"

namespace hjipi {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

EngineOptions metric_options(const PITrainConfig& config) {
  EngineOptions o;
  o.precision = Precision::kFloat64;
  o.workers = config.engine.workers;
  return o;
}

// Training batch with its frozen-policy data, rebuilt at every resample.
struct EvaluationBatch {
  JetBatch jets;
  FrozenTerms terms;
  TerminalPenalty penalty;
};

EvaluationBatch build_batch(const GameProblem& problem,
                            const PolicySnapshot* snapshot,
                            const PITrainConfig& config, std::uint64_t seed) {
  const Eigen::Index n_bc =
      config.form == ValueForm::kPlain ? config.terminal_points : 0;
  CollocationBatch col = sample_collocation(
      problem.training_domain, problem.horizon, config.collocation, seed, n_bc);
  EvaluationBatch out;
  if (snapshot != nullptr) {
    const PolicyTable policy =
        evaluate_policy(*snapshot, problem, col.t, col.x, metric_options(config));
    out.terms = frozen_terms(problem, col.t, col.x, policy);
  }
  out.penalty.x = col.terminal_x;
  out.penalty.g.resize(n_bc);
  for (Eigen::Index k = 0; k < n_bc; ++k) {
    out.penalty.g[k] = problem.terminal.value(col.terminal_x.col(k));
  }
  out.jets = make_jet_batch(problem, std::move(col.t), std::move(col.x), config.form);
  return out;
}

// Runs `epochs` Adam steps, resampling through `rebuild(block)`.
template <typename Rebuild, typename Residual>
std::vector<double> adam_loop(NetworkState& state, AdamState& adam,
                              const PITrainConfig& config, long epochs,
                              const Rebuild& rebuild, const Residual& make_fn,
                              const char* label, int iteration) {
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(std::max(0L, epochs)));
  LossEvaluator evaluator(state.arch(), config.engine);
  // fn may point into batch; both live for the whole loop.
  EvaluationBatch batch;
  ResidualFn fn;
  for (long e = 0; e < epochs; ++e) {
    if (e % config.resample_interval == 0) {
      batch = rebuild(e / config.resample_interval);
      fn = make_fn(batch);
    }
    const TerminalPenalty* pen =
        batch.penalty.x.cols() > 0 ? &batch.penalty : nullptr;
    LossGradient lg;
    try {
      lg = evaluator.evaluate(state, batch.jets, fn, pen);
    } catch (const Error& err) {
      if (err.category() != ErrorCategory::kNumerical) throw;
      fail(ErrorCategory::kNumerical, std::string(label) + ": iteration " +
                                          std::to_string(iteration) + ", epoch " +
                                          std::to_string(e) + ": " + err.what());
    }
    trace.push_back(lg.loss);
    adam_step(adam, state.params(), lg.grad);
    if (!state.all_finite()) {
      fail(ErrorCategory::kNumerical, std::string(label) + ": non-finite parameters at iteration " +
                                          std::to_string(iteration) + ", epoch " +
                                          std::to_string(e));
    }
  }
  return trace;
}

void write_checkpoint(const std::string& dir, const IterationRecord& rec,
                      const NetworkState& state, IterationRecord& out) {
  std::filesystem::create_directories(dir);
  char name[32];
  std::snprintf(name, sizeof(name), "iter_%04d", rec.iteration);
  const std::string base = (std::filesystem::path(dir) / name).string();
  save_network(state, base + ".txt");
  nlohmann::ordered_json meta;
  meta["iteration"] = rec.iteration;
  meta["epochs"] = rec.loss.size();
  meta["final_loss"] = rec.loss.empty() ? 0.0 : rec.loss.back();
  meta["residual_norm"] = rec.residual_norm;
  meta["residual_se"] = rec.residual_se;
  meta["sup_diff"] = rec.sup_diff;
  meta["network"] = std::string(name) + ".txt";
  std::ofstream f(base + ".json");
  f << meta.dump(2) << "\n";
  if (!f) fail(ErrorCategory::kIo, "checkpoint: cannot write '" + base + ".json'");
  out.checkpoint = base + ".txt";
}

}  // namespace

void PITrainConfig::validate() const {
  if (epochs < 0 || updates <= 0 || collocation <= 0 || resample_interval <= 0) {
    fail(ErrorCategory::kInvalidArgument,
         "training: need E >= 0, M > 0, N_int > 0, resample_interval > 0");
  }
  if (validation <= 0 || residual_samples < 0 || terminal_points < 0) {
    fail(ErrorCategory::kInvalidArgument,
         "training: validation > 0, residual_samples >= 0, terminal_points >= 0");
  }
  if (!(tol >= 0.0)) fail(ErrorCategory::kInvalidArgument, "training: tol must be >= 0");
  if (engine.workers < 1 || engine.chunk_size < 1) {
    fail(ErrorCategory::kInvalidArgument, "training: workers and chunk_size >= 1");
  }
  adam.validate();
  minimax.validate();
}

PITrainConfig PITrainConfig::path_planning_defaults() {
  PITrainConfig c;
  c.epochs = 1000;
  c.updates = 1000;
  c.collocation = 2000;
  c.hidden = {64, 64, 64, 64};
  return c;
}

PITrainConfig PITrainConfig::pubsub_defaults(int n) {
  PITrainConfig c;
  c.epochs = 5000;
  c.updates = 500;
  c.collocation = static_cast<Eigen::Index>(n) * 1000;
  c.hidden = {64, 64, 64};
  return c;
}

std::vector<double> IterationHistory::sup_diffs() const {
  std::vector<double> out;
  for (const auto& r : records) out.push_back(r.sup_diff);
  return out;
}

ValidationSet make_validation_set(const GameProblem& problem, Eigen::Index n,
                                  std::uint64_t seed) {
  if (n <= 0) fail(ErrorCategory::kInvalidArgument, "validation: empty set");
  CollocationBatch b = sample_collocation(problem.target_domain, problem.horizon, n, seed);
  return {std::move(b.t), std::move(b.x)};
}

Eigen::VectorXd validation_values(const NetworkState& state,
                                  const ValidationSet& set,
                                  const GameProblem& problem, ValueForm form) {
  return evaluate_values(state, set.t, set.x, problem.terminal, problem.horizon, form);
}

double estimate_sup_norm_diff(const NetworkState& a, const NetworkState& b,
                              const ValidationSet& set,
                              const GameProblem& problem, ValueForm form) {
  if (set.t.size() == 0) fail(ErrorCategory::kInvalidArgument, "sup norm: empty set");
  const Eigen::VectorXd va = validation_values(a, set, problem, form);
  const Eigen::VectorXd vb = validation_values(b, set, problem, form);
  return (va - vb).cwiseAbs().maxCoeff();
}

ResidualNorm residual_norm_from_samples(const Eigen::VectorXd& r, double measure) {
  ResidualNorm out;
  const Eigen::Index n = r.size();
  if (n == 0) return out;
  const Eigen::ArrayXd sq = r.array().square();
  const double m2 = sq.mean();
  out.value = std::sqrt(measure * m2);
  if (n > 1 && out.value > 0.0) {
    const double var = (sq - m2).square().sum() / static_cast<double>(n - 1);
    const double se_m2 = std::sqrt(var / static_cast<double>(n));
    out.standard_error = measure * se_m2 / (2.0 * out.value);
  }
  return out;
}

ResidualNorm empirical_residual_norm(const NetworkState& state,
                                     const PolicySnapshot& snapshot,
                                     const GameProblem& problem,
                                     Eigen::Index samples, std::uint64_t seed,
                                     ValueForm form) {
  if (samples <= 0) return {};
  CollocationBatch col =
      sample_collocation(problem.target_domain, problem.horizon, samples, seed);
  const PolicyTable policy = evaluate_policy(snapshot, problem, col.t, col.x);
  const FrozenTerms terms = frozen_terms(problem, col.t, col.x, policy);
  const JetBatch batch = make_jet_batch(problem, col.t, col.x, form);
  const std::vector<ValueJet> jets = evaluate_jets(state, batch);
  Eigen::VectorXd r(samples);
  for (Eigen::Index j = 0; j < samples; ++j) {
    r[j] = frozen_residual(jets[j], terms.c[j], terms.f.col(j)).r;
  }
  return residual_norm_from_samples(
      r, problem.horizon * problem.target_domain.volume());
}

std::vector<double> train_policy_evaluation(NetworkState& state,
                                            AdamState& adam,
                                            const PolicySnapshot& snapshot,
                                            const PITrainConfig& config,
                                            const GameProblem& problem,
                                            int iteration) {
  config.validate();
  return adam_loop(
      state, adam, config, config.epochs,
      [&](long block) {
        return build_batch(problem, &snapshot, config,
                           stream_seed(config.seed, SeedStream::kCollocation,
                                       static_cast<std::uint64_t>(iteration),
                                       static_cast<std::uint64_t>(block)));
      },
      [](const EvaluationBatch& b) -> ResidualFn {
        const FrozenTerms* terms = &b.terms;
        return [terms](Eigen::Index j, const ValueJet& jet) {
          return frozen_residual(jet, terms->c[j], terms->f.col(j));
        };
      },
      "policy evaluation", iteration);
}

PIResult run_policy_iteration(const GameProblem& problem,
                              const PITrainConfig& config,
                              const PIObserver& observer) {
  config.validate();
  problem.validate();
  const NetworkArch arch = NetworkArch::for_state_dim(problem.dim, config.hidden);
  PIResult result{xavier_init(arch, stream_seed(config.seed, SeedStream::kInit)), {}};
  NetworkState& state = result.state;
  AdamState adam(config.adam, arch.num_params());
  const ValidationSet val = make_validation_set(
      problem, config.validation, stream_seed(config.seed, SeedStream::kValidation));
  Eigen::VectorXd previous = validation_values(state, val, problem, config.form);
  PolicySnapshot snapshot =
      PolicySnapshot::uniform(stream_seed(config.seed, SeedStream::kPolicy));

  for (int n = 0; n < config.updates; ++n) {
    const auto start = Clock::now();
    if (observer.before_evaluation) observer.before_evaluation(n, state);
    IterationRecord rec;
    rec.iteration = n;
    rec.loss = train_policy_evaluation(state, adam, snapshot, config, problem, n);
    if (config.residual_samples > 0) {
      const ResidualNorm rn = empirical_residual_norm(
          state, snapshot, problem, config.residual_samples,
          stream_seed(config.seed, SeedStream::kResidual, static_cast<std::uint64_t>(n)),
          config.form);
      rec.residual_norm = rn.value;
      rec.residual_se = rn.standard_error;
    }
    Eigen::VectorXd current = validation_values(state, val, problem, config.form);
    rec.sup_diff = (current - previous).cwiseAbs().maxCoeff();
    previous = std::move(current);
    if (!config.checkpoint_dir.empty()) {
      write_checkpoint(config.checkpoint_dir, rec, state, rec);
    }
    rec.seconds = seconds_since(start);
    result.history.records.push_back(rec);
    if (observer.after_iteration) observer.after_iteration(rec, state);
    if (n >= 1 && rec.sup_diff < config.tol) {
      result.history.converged = true;
      break;
    }
    snapshot = PolicySnapshot::frozen(state, config.form, config.selector, config.minimax);
  }
  return result;
}

DirectResult direct_pinn_train(const GameProblem& problem,
                               const PITrainConfig& config) {
  config.validate();
  problem.validate();
  if (!problem.has_closed_form_hamiltonian()) {
    fail(ErrorCategory::kInvalidArgument,
         "direct PINN: problem has no closed-form Hamiltonian");
  }
  const auto start = Clock::now();
  const NetworkArch arch = NetworkArch::for_state_dim(problem.dim, config.hidden);
  DirectResult result{xavier_init(arch, stream_seed(config.seed, SeedStream::kInit)), {}, 0.0};
  AdamState adam(config.adam, arch.num_params());
  const long total = static_cast<long>(config.epochs) * config.updates;
  result.loss = adam_loop(
      result.state, adam, config, total,
      [&](long block) {
        return build_batch(problem, nullptr, config,
                           stream_seed(config.seed, SeedStream::kCollocation, 0,
                                       static_cast<std::uint64_t>(block)));
      },
      [&](const EvaluationBatch& b) -> ResidualFn {
        const JetBatch* jets = &b.jets;
        return [&problem, &config, jets](Eigen::Index j, const ValueJet& jet) {
          return hji_residual(problem, jets->t[j], jets->x.col(j), jet,
                              config.selector, config.minimax);
        };
      },
      "direct PINN", 0);
  result.seconds = seconds_since(start);
  return result;
}

void write_history_csv(const IterationHistory& history, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::kIo, "cannot open '" + path + "'");
  out << "iteration,epoch,loss,p_n,sup_diff\n";
  for (const IterationRecord& rec : history.records) {
    for (std::size_t e = 0; e < rec.loss.size(); ++e) {
      out << rec.iteration << ',' << e << ',' << detail::format_double(rec.loss[e]);
      if (e + 1 == rec.loss.size()) {
        out << ',' << detail::format_double(rec.residual_norm) << ','
            << detail::format_double(rec.sup_diff) << '\n';
      } else {
        out << ",,\n";
      }
    }
    if (rec.loss.empty()) {
      out << rec.iteration << ",,," << detail::format_double(rec.residual_norm)
          << ',' << detail::format_double(rec.sup_diff) << '\n';
    }
  }
  if (!out) fail(ErrorCategory::kIo, "write failed for '" + path + "'");
}

void write_loss_csv(const std::vector<double>& loss, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::kIo, "cannot open '" + path + "'");
  out << "epoch,loss\n";
  for (std::size_t e = 0; e < loss.size(); ++e) {
    out << e << ',' << detail::format_double(loss[e]) << '\n';
  }
  if (!out) fail(ErrorCategory::kIo, "write failed for '" + path + "'");
}

}  // namespace hjipi
