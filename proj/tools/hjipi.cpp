// Command line front end: one subcommand per run, a JSON config with flag
// overrides, and a manifest.json with the resolved config, seeds and
// artifact checksums in the output directory.

#include <CLI11.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hjipi/analysis.hpp"
#include "hjipi/config.hpp"
#include "hjipi/fdm.hpp"
#include "hjipi/network.hpp"
#include "hjipi/pinn.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace hjipi {
namespace {

constexpr std::uint64_t kProbeStream = 7;

struct Options {
  std::string config;
  std::vector<std::string> set;
  std::vector<ConfigOverride> flags;
};

struct RunOutput {
  std::vector<std::string> artifacts;  // relative to the output directory
  Json extra = Json::object();
};

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kIo, "cannot read '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    fail(ErrorCategory::kIo, "sha256: digest unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in.read(buf.data(), static_cast<std::streamsize>(buf.size())) || in.gcount() > 0) {
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof byte, "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

void require_file(const std::string& path, const char* what) {
  if (path.empty()) fail(ErrorCategory::kMissingInput, std::string(what) + " path not given");
  if (!fs::is_regular_file(path)) fail(ErrorCategory::kMissingInput, std::string(what) + " '" + path + "' not found");
}

EngineOptions evaluation_engine(const RunConfig& c) {
  return {Precision::kFloat64, c.training.engine.chunk_size, c.workers};
}

Json history_summary(const IterationHistory& h) {
  return Json{{"iterations", h.size()},
              {"converged", h.converged},
              {"final_sup_diff", h.records.empty() ? 0.0 : h.records.back().sup_diff}};
}

RunOutput run_solve_pinn_pi(const RunConfig& c, const GameProblem& problem) {
  RunOutput out;
  PITrainConfig training = c.training;
  if (c.checkpoints) training.checkpoint_dir = (fs::path(c.out) / "checkpoints").string();
  const PIResult result = run_policy_iteration(problem, training);
  save_network(result.state, (fs::path(c.out) / "network.txt").string());
  write_history_csv(result.history, (fs::path(c.out) / "history.csv").string());
  out.artifacts = {"network.txt", "history.csv"};
  if (result.history.size() >= 4) {
    const RateFit fit = convergence_history(result.history, 1, 0, problem.label);
    write_rates_csv(fit, (fs::path(c.out) / "rates.csv").string());
    out.artifacts.push_back("rates.csv");
    out.extra["rate_fit"] = Json{{"slope", fit.slope}, {"rho", fit.rho()}, {"r_squared", fit.r_squared}};
  }
  for (const IterationRecord& r : result.history.records) {
    if (!r.checkpoint.empty()) {
      fs::path p = fs::relative(r.checkpoint, c.out);
      out.artifacts.push_back(p.string());
      out.artifacts.push_back(p.replace_extension(".json").string());
    }
  }
  out.extra["history"] = history_summary(result.history);
  double seconds = 0.0;
  for (const IterationRecord& r : result.history.records) seconds += r.seconds;
  out.extra["training_seconds"] = seconds;
  return out;
}

RunOutput run_solve_direct(const RunConfig& c, const GameProblem& problem) {
  RunOutput out;
  const DirectResult result = direct_pinn_train(problem, c.training);
  save_network(result.state, (fs::path(c.out) / "network.txt").string());
  write_loss_csv(result.loss, (fs::path(c.out) / "loss.csv").string());
  out.artifacts = {"network.txt", "loss.csv"};
  out.extra["epochs"] = result.loss.size();
  out.extra["final_loss"] = result.loss.empty() ? 0.0 : result.loss.back();
  out.extra["training_seconds"] = result.seconds;
  return out;
}

Json plan_json(const StepPlan& p) {
  return Json{{"dx_min", p.dx_min},
              {"dt_dx2", p.dt_dx2},
              {"dt_diffusion", p.dt_diffusion},
              {"dt_advection", p.dt_advection},
              {"dt", p.dt},
              {"steps", p.steps},
              {"steps_per_slice", p.steps_per_slice}};
}

// Two-dimensional problems are solved directly and stored on the target
// sub-grid. Higher-dimensional isotropic pub-sub stores the shared pair
// solve on its full grid.
RunOutput run_solve_fdm(const RunConfig& c, const GameProblem& problem) {
  RunOutput out;
  const std::string name = c.binary_grid ? "grid.bin" : "grid.csv";
  const std::string path = (fs::path(c.out) / name).string();
  if (problem.dim == 2) {
    out.extra["step_plan"] = plan_json(plan_steps(problem, c.fdm));
    const RestrictResult r = restrict_to_target(fdm_solve_2d(problem, c.fdm), c.fdm.target);
    save_grid(r.grid, path);
    out.extra["reference"] = "direct";
    out.extra["snapped"] = r.snapped;
    if (r.snapped) out.extra["snap_report"] = r.report;
  } else {
    if (c.problem.kind != ProblemKind::kPubSub) {
      fail(ErrorCategory::kConfig, "solve-fdm: only two-dimensional problems or pub-sub decompose");
    }
    const PubSubParams& params = c.problem.pubsub;
    if (params.anisotropy > 0.0) {
      fail(ErrorCategory::kConfig, "solve-fdm: anisotropic pub-sub with n > 2 has no pairwise reference");
    }
    const Eigen::MatrixXd sigma = params.noise * Eigen::MatrixXd::Identity(params.n, params.n);
    out.extra["step_plan"] = plan_json(plan_steps(make_pubsub_pair_problem(params, sigma, 1), c.fdm));
    const PairwiseReference ref = reference_nd_isotropic(params, c.fdm);
    save_grid(ref.pair_grid(1), path);
    out.extra["reference"] = "pairwise";
  }
  out.artifacts = {name};
  return out;
}

RunOutput run_compare(const RunConfig& c, const GameProblem& problem) {
  require_file(c.compare.network, "network");
  require_file(c.compare.reference, "reference");
  const NetworkState state = load_network(c.compare.network);
  if (state.arch().state_dim() != problem.dim) {
    fail(ErrorCategory::kInvalidArgument, "compare: network dimension does not match the problem");
  }
  const TimeGrid grid = load_grid(c.compare.reference);
  ErrorReport report;
  if (grid.dim() == problem.dim) {
    report = compare_to_grid(state, c.training.form, problem, grid, c.compare.times, c.compare.method,
                             evaluation_engine(c));
  } else if (grid.dim() == 2 && c.problem.kind == ProblemKind::kPubSub) {
    const TimeInterpolation mode = c.compare.interpolation;
    const ValueFn ref = [&grid, mode](double t, VecRef x) {
      double v = 0.0;
      for (Eigen::Index i = 1; i < x.size(); ++i) v += interpolate(grid, t, Eigen::Vector2d(x[0], x[i]), mode);
      return v;
    };
    report = compare_to_function(state, c.training.form, problem, ref, c.compare.times, c.compare.samples,
                                 derive_seed(c.seed, kProbeStream, 1), c.compare.method, evaluation_engine(c));
  } else {
    fail(ErrorCategory::kInvalidArgument, "compare: reference grid dimension does not match the problem");
  }
  RunOutput out;
  write_errors_csv({report}, (fs::path(c.out) / "errors.csv").string());
  write_error_table_csv({report}, (fs::path(c.out) / "table.csv").string());
  out.artifacts = {"errors.csv", "table.csv"};
  Json slices = Json::array();
  for (const SliceError& s : report.slices) slices.push_back({{"t", s.t}, {"rel_l2", s.rel_l2}, {"mse", s.mse}});
  out.extra["grid"] = report.grid.describe();
  out.extra["errors"] = slices;
  return out;
}

RunOutput run_trajectories(const RunConfig& c, const GameProblem& problem) {
  require_file(c.trajectories.network, "network");
  auto state = std::make_shared<const NetworkState>(load_network(c.trajectories.network));
  if (state->arch().state_dim() != problem.dim) {
    fail(ErrorCategory::kInvalidArgument, "trajectories: network dimension does not match the problem");
  }
  const FeedbackPolicy policy = network_feedback(state, c.training.form, problem, c.training.selector,
                                                 c.training.minimax, c.trajectories.disturbance);
  const TrajectorySection& k = c.trajectories;
  const std::vector<Trajectory> paths =
      euler_maruyama_paths(problem, policy, k.x0, k.dt, k.steps, k.paths,
                           stream_seed(c.seed, SeedStream::kTrajectory), c.workers);
  write_trajectories_csv(paths, (fs::path(c.out) / "trajectories.csv").string());
  RunOutput out;
  out.artifacts = {"trajectories.csv"};
  return out;
}

RunOutput run_probe_theory(const RunConfig& c, const GameProblem& problem) {
  const SelectorMap sel = make_selector_map(problem, c.probe.component, c.training.selector, c.training.minimax);
  const SelectorProbeResult r = lipschitz_selector_probe(problem, sel, c.probe.samples,
                                                         derive_seed(c.seed, kProbeStream),
                                                         c.probe.p_radius, c.probe.min_dp);
  write_probes_csv({r}, (fs::path(c.out) / "probes.csv").string());
  RunOutput out;
  out.artifacts = {"probes.csv"};
  out.extra["kappa_hat"] = r.kappa_hat;
  if (c.problem.kind == ProblemKind::kPathPlanning && c.probe.component == SelectorComponent::kA) {
    out.extra["kappa_bound"] = 1.0 / (2.0 * c.problem.path_planning.lambda1);
  }
  return out;
}

Json seeds_json(std::uint64_t seed) {
  return Json{{"run", seed},
              {"init", stream_seed(seed, SeedStream::kInit)},
              {"collocation", stream_seed(seed, SeedStream::kCollocation)},
              {"validation", stream_seed(seed, SeedStream::kValidation)},
              {"residual", stream_seed(seed, SeedStream::kResidual)},
              {"policy", stream_seed(seed, SeedStream::kPolicy)},
              {"trajectory", stream_seed(seed, SeedStream::kTrajectory)},
              {"probe", derive_seed(seed, kProbeStream)}};
}

int dispatch(Subcommand sub, const Options& opts) {
  std::vector<ConfigOverride> overrides;
  for (const std::string& s : opts.set) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(ErrorCategory::kInvalidArgument, "--set expects KEY=VALUE, got '" + s + "'");
    overrides.push_back({s.substr(0, eq), s.substr(eq + 1)});
  }
  overrides.insert(overrides.end(), opts.flags.begin(), opts.flags.end());
  const RunConfig config = load_config(sub, opts.config, overrides);
  const GameProblem problem = make_problem(config.problem);

  std::error_code ec;
  fs::create_directories(config.out, ec);
  if (ec || !fs::is_directory(config.out)) fail(ErrorCategory::kIo, "cannot create output directory '" + config.out + "'");

  const auto start = std::chrono::steady_clock::now();
  RunOutput out;
  switch (sub) {
    case Subcommand::kSolvePinnPi: out = run_solve_pinn_pi(config, problem); break;
    case Subcommand::kSolveDirect: out = run_solve_direct(config, problem); break;
    case Subcommand::kSolveFdm: out = run_solve_fdm(config, problem); break;
    case Subcommand::kCompare: out = run_compare(config, problem); break;
    case Subcommand::kTrajectories: out = run_trajectories(config, problem); break;
    case Subcommand::kProbeTheory: out = run_probe_theory(config, problem); break;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Json artifacts = Json::array();
  for (const std::string& a : out.artifacts) {
    const fs::path p = fs::path(config.out) / a;
    artifacts.push_back({{"path", a}, {"bytes", fs::file_size(p)}, {"sha256", sha256_file(p)}});
  }
  Json manifest{{"tool", "hjipi"},
                {"subcommand", subcommand_name(sub)},
                {"problem", problem.label},
                {"config", Json::parse(config_to_json(config))},
                {"seeds", seeds_json(config.seed)},
                {"artifacts", artifacts},
                {"results", out.extra},
                {"seconds", seconds}};
  const fs::path manifest_path = fs::path(config.out) / "manifest.json";
  std::ofstream mf(manifest_path);
  mf << manifest.dump(2) << '\n';
  if (!mf) fail(ErrorCategory::kIo, "cannot write '" + manifest_path.string() + "'");

  std::cout << subcommand_name(sub) << ": " << problem.label << " -> " << config.out << '\n';
  for (const std::string& a : out.artifacts) std::cout << "  " << a << '\n';
  if (!out.extra.empty()) std::cout << out.extra.dump() << '\n';
  return 0;
}

// Adds a typed flag that becomes a config override when given.
template <typename T>
void override_flag(CLI::App* app, Options& opts, const std::string& name, const std::string& key,
                   const std::string& help) {
  app->add_option_function<T>(
      name, [&opts, key](const T& v) { opts.flags.push_back({key, Json(v).dump()}); }, help);
}

void add_common(CLI::App* app, Options& opts) {
  app->add_option("--config", opts.config, "JSON config file");
  app->add_option("--set", opts.set, "Config override KEY=VALUE with a dotted key, repeatable");
  override_flag<std::uint64_t>(app, opts, "--seed", "seed", "Run seed");
  override_flag<std::string>(app, opts, "--out", "out", "Output directory");
  override_flag<int>(app, opts, "--workers", "workers", "Worker threads");
  app->add_flag_callback(
      "--deterministic", [&opts] { opts.flags.push_back({"deterministic", "true"}); },
      "Require fixed reduction orders");
  override_flag<std::string>(app, opts, "--problem", "problem.kind", "path_planning or pubsub");
  override_flag<int>(app, opts, "--dim", "problem.n", "Pub-sub state dimension N");
  override_flag<double>(app, opts, "--horizon", "problem.horizon", "Time horizon T");
}

void add_training(CLI::App* app, Options& opts) {
  override_flag<int>(app, opts, "--epochs", "training.epochs", "Epochs per policy update (E)");
  override_flag<int>(app, opts, "--updates", "training.updates", "Policy updates (M)");
  override_flag<long>(app, opts, "--collocation", "training.collocation", "Collocation points");
  override_flag<double>(app, opts, "--lr", "training.learning_rate", "Adam learning rate");
  override_flag<double>(app, opts, "--tol", "training.tol", "Stopping tolerance on the sup-norm change");
  override_flag<std::vector<int>>(app, opts, "--hidden", "training.hidden", "Hidden layer widths");
  override_flag<std::string>(app, opts, "--selector", "training.selector", "closed_form or numeric");
}

}  // namespace
}  // namespace hjipi

int main(int argc, char** argv) {
  using namespace hjipi;
  CLI::App app{"Policy-iteration PINN and finite-difference solvers for HJI equations"};
  app.require_subcommand(1);
  Options opts;
  std::optional<Subcommand> chosen;

  auto sub = [&](Subcommand s, const std::string& help) {
    CLI::App* a = app.add_subcommand(subcommand_name(s), help);
    add_common(a, opts);
    a->callback([&chosen, s] { chosen = s; });
    return a;
  };

  CLI::App* pi = sub(Subcommand::kSolvePinnPi, "Train a value network by policy iteration");
  add_training(pi, opts);
  pi->add_flag_callback(
      "--checkpoints", [&opts] { opts.flags.push_back({"training.checkpoints", "true"}); },
      "Write a checkpoint per outer iteration");

  CLI::App* direct = sub(Subcommand::kSolveDirect, "Train a value network on the HJI residual directly");
  add_training(direct, opts);

  CLI::App* fdm = sub(Subcommand::kSolveFdm, "Finite-difference reference solution");
  override_flag<int>(fdm, opts, "--points", "fdm.points", "Grid points per axis");
  override_flag<int>(fdm, opts, "--slices", "fdm.saved_slices", "Stored time slices");
  fdm->add_flag_callback(
      "--binary", [&opts] { opts.flags.push_back({"fdm.binary", "true"}); }, "Write the grid in binary form");

  CLI::App* cmp = sub(Subcommand::kCompare, "Error of a trained network against a reference grid");
  override_flag<std::string>(cmp, opts, "--network", "compare.network", "Network file");
  override_flag<std::string>(cmp, opts, "--reference", "compare.reference", "Reference grid file");
  override_flag<std::vector<double>>(cmp, opts, "--times", "compare.times", "Evaluation times");
  override_flag<std::string>(cmp, opts, "--method", "compare.method", "Method label");

  CLI::App* traj = sub(Subcommand::kTrajectories, "Euler-Maruyama rollouts under the network feedback");
  override_flag<std::string>(traj, opts, "--network", "trajectories.network", "Network file");
  override_flag<std::vector<double>>(traj, opts, "--x0", "trajectories.x0", "Initial state");
  override_flag<long>(traj, opts, "--paths", "trajectories.paths", "Number of paths");
  override_flag<double>(traj, opts, "--dt", "trajectories.dt", "Time step");
  override_flag<long>(traj, opts, "--steps", "trajectories.steps", "Number of steps");

  CLI::App* probe = sub(Subcommand::kProbeTheory, "Empirical Lipschitz constant of the control selector");
  override_flag<long>(probe, opts, "--samples", "probe.samples", "Sampled gradient pairs");
  override_flag<std::string>(probe, opts, "--component", "probe.component", "a, b or both");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorCategory::kInvalidArgument);
  }
  try {
    return dispatch(*chosen, opts);
  } catch (const Error& e) {
    std::cerr << "hjipi: " << category_name(e.category()) << ": " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "hjipi: " << e.what() << '\n';
    return 1;
  }
}
