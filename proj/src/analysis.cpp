#include "hjipi/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <sstream>

#include "format.hpp"

namespace hjipi {

namespace {

using detail::format_double;

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorCategory::kIo, "cannot write '" + path + "'");
  return out;
}

void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) fail(ErrorCategory::kIo, "write failed for '" + path + "'");
}

std::vector<double> sorted_times(std::vector<double> times) {
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  return times;
}

// dv/dt + H + 1/2 sum a_ij D_ij v with every derivative by centered
// differences of v.
double fd_hji_residual(const ValueFn& v, const GameProblem& problem, double t,
                       const Eigen::VectorXd& x, double h, double ds) {
  const int d = problem.dim;
  const double v0 = v(t, x);
  const double dv_dt = (v(t + ds, x) - v(t - ds, x)) / (2.0 * ds);
  Eigen::VectorXd grad(d), plus(d), minus(d);
  Eigen::MatrixXd hess(d, d);
  Eigen::VectorXd y = x;
  for (int i = 0; i < d; ++i) {
    y[i] = x[i] + h;
    plus[i] = v(t, y);
    y[i] = x[i] - h;
    minus[i] = v(t, y);
    y[i] = x[i];
    grad[i] = (plus[i] - minus[i]) / (2.0 * h);
    hess(i, i) = (plus[i] - 2.0 * v0 + minus[i]) / (h * h);
  }
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      double acc = 0.0;
      for (int si : {1, -1}) {
        for (int sj : {1, -1}) {
          y[i] = x[i] + si * h;
          y[j] = x[j] + sj * h;
          acc += si * sj * v(t, y);
        }
      }
      y[i] = x[i];
      y[j] = x[j];
      hess(i, j) = hess(j, i) = acc / (4.0 * h * h);
    }
  }
  const Eigen::MatrixXd s = problem.sigma(t, x);
  const Eigen::MatrixXd a = s * s.transpose();
  return dv_dt + problem.hamiltonian(t, x, grad) + 0.5 * (a.array() * hess.array()).sum();
}

}  // namespace

double relative_l2_error(ConstVec pred, ConstVec ref) {
  if (pred.size() != ref.size()) fail(ErrorCategory::kInvalidArgument, "relative_l2_error: shape mismatch");
  const double norm = ref.norm();
  if (!(norm > 0.0)) fail(ErrorCategory::kInvalidArgument, "relative_l2_error: zero reference");
  return (pred - ref).norm() / norm;
}

double mse(ConstVec pred, ConstVec ref) {
  if (pred.size() != ref.size() || pred.size() == 0) {
    fail(ErrorCategory::kInvalidArgument, "mse: shape mismatch");
  }
  return (pred - ref).squaredNorm() / static_cast<double>(pred.size());
}

std::string GridDescriptor::describe() const {
  std::ostringstream out;
  for (int k = 0; k < extent.dim(); ++k) {
    out << (k ? " x " : "") << "[" << extent.lower[k] << ", " << extent.upper[k] << "]";
  }
  if (!points.empty()) {
    out << " grid ";
    for (std::size_t k = 0; k < points.size(); ++k) out << (k ? "x" : "") << points[k];
  } else {
    out << " " << samples << " uniform samples";
  }
  return out.str();
}

void ErrorReport::validate() const {
  for (std::size_t k = 0; k < slices.size(); ++k) {
    const SliceError& s = slices[k];
    if (!(s.rel_l2 >= 0.0) || !(s.mse >= 0.0)) {
      fail(ErrorCategory::kNumerical, "error report: negative or NaN error");
    }
    if (k > 0 && !(s.t > slices[k - 1].t)) {
      fail(ErrorCategory::kInvalidArgument, "error report: slices must be sorted by time");
    }
  }
}

ErrorReport compare_to_grid(const NetworkState& state, ValueForm form,
                            const GameProblem& problem, const TimeGrid& reference,
                            const std::vector<double>& times, const std::string& method,
                            const EngineOptions& options) {
  reference.validate();
  if (reference.dim() != problem.dim) fail(ErrorCategory::kInvalidArgument, "compare: dimension mismatch");
  ErrorReport report;
  report.problem = problem.label;
  report.method = method;
  report.grid.extent = reference.extent;
  report.grid.points = reference.points;
  report.grid.samples = reference.num_nodes();
  const Eigen::Index m = reference.num_nodes();
  Eigen::MatrixXd nodes(problem.dim, m);
  for (Eigen::Index f = 0; f < m; ++f) nodes.col(f) = reference.node(f);
  const double tol = 1e-9 * std::max(1.0, problem.horizon);
  for (double t : sorted_times(times)) {
    const int s = reference.slice_at(t, tol);
    if (s < 0) {
      fail(ErrorCategory::kInvalidArgument,
           "compare: t = " + format_double(t) + " is not a stored reference slice");
    }
    const Eigen::VectorXd tv = Eigen::VectorXd::Constant(m, reference.times[s]);
    const Eigen::VectorXd pred =
        evaluate_values(state, tv, nodes, problem.terminal, problem.horizon, form, options);
    report.slices.push_back({reference.times[s], relative_l2_error(pred, reference.slices[s]),
                             mse(pred, reference.slices[s])});
  }
  report.validate();
  return report;
}

ErrorReport compare_to_function(const NetworkState& state, ValueForm form,
                                const GameProblem& problem, const ValueFn& reference,
                                const std::vector<double>& times, Eigen::Index n,
                                std::uint64_t seed, const std::string& method,
                                const EngineOptions& options) {
  if (n < 1) fail(ErrorCategory::kInvalidArgument, "compare: need n >= 1");
  const Box& box = problem.target_domain;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::MatrixXd x(problem.dim, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (int i = 0; i < problem.dim; ++i) {
      x(i, j) = box.lower[i] + (box.upper[i] - box.lower[i]) * unit(rng);
    }
  }
  ErrorReport report;
  report.problem = problem.label;
  report.method = method;
  report.grid.extent = box;
  report.grid.samples = n;
  for (double t : sorted_times(times)) {
    const Eigen::VectorXd tv = Eigen::VectorXd::Constant(n, t);
    const Eigen::VectorXd pred =
        evaluate_values(state, tv, x, problem.terminal, problem.horizon, form, options);
    Eigen::VectorXd ref(n);
    for (Eigen::Index j = 0; j < n; ++j) ref[j] = reference(t, x.col(j));
    report.slices.push_back({t, relative_l2_error(pred, ref), mse(pred, ref)});
  }
  report.validate();
  return report;
}

double RateFit::rho() const { return std::exp(slope); }

RateFit fit_log_linear(const std::vector<int>& iterations, const std::vector<double>& changes,
                       std::string label) {
  if (iterations.size() != changes.size() || changes.size() < 3) {
    fail(ErrorCategory::kInvalidArgument, "rate fit: need at least 3 matching values");
  }
  RateFit fit;
  fit.label = std::move(label);
  fit.iterations = iterations;
  fit.changes = changes;
  const auto n = static_cast<Eigen::Index>(changes.size());
  Eigen::VectorXd xs(n), ys(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    if (std::isnan(changes[k])) fail(ErrorCategory::kNumerical, "rate fit: NaN change");
    xs[k] = iterations[k];
    ys[k] = std::log(std::max(changes[k], std::numeric_limits<double>::epsilon()));
  }
  const double mx = xs.mean(), my = ys.mean();
  const double sxx = (xs.array() - mx).square().sum();
  if (!(sxx > 0.0)) fail(ErrorCategory::kInvalidArgument, "rate fit: iterations must differ");
  fit.slope = ((xs.array() - mx) * (ys.array() - my)).sum() / sxx;
  fit.intercept = my - fit.slope * mx;
  const double ss_tot = (ys.array() - my).square().sum();
  const double ss_res = (ys.array() - fit.intercept - fit.slope * xs.array()).square().sum();
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

RateFit convergence_history(const IterationHistory& history, int first, int count,
                            std::string label) {
  if (first < 0 || count < 0) fail(ErrorCategory::kInvalidArgument, "rate fit: bad range");
  std::vector<int> its;
  std::vector<double> changes;
  for (const IterationRecord& r : history.records) {
    if (r.iteration < first) continue;
    if (count > 0 && r.iteration >= first + count) break;
    its.push_back(r.iteration);
    changes.push_back(r.sup_diff);
  }
  return fit_log_linear(its, changes, std::move(label));
}

SelectorMap make_selector_map(const GameProblem& problem, SelectorComponent component,
                              SelectorMode mode, const MinimaxConfig& minimax) {
  const GameProblem* p = &problem;
  return [p, component, mode, minimax](double t, VecRef x, VecRef grad) -> Eigen::VectorXd {
    const ControlPair c = select_controls(*p, mode, minimax, t, x, grad);
    switch (component) {
      case SelectorComponent::kA:
        return c.a;
      case SelectorComponent::kB:
        return c.b;
      case SelectorComponent::kBoth:
        break;
    }
    Eigen::VectorXd both(c.a.size() + c.b.size());
    both << c.a, c.b;
    return both;
  };
}

SelectorProbeResult lipschitz_selector_probe(const GameProblem& problem,
                                             const SelectorMap& selector, long samples,
                                             std::uint64_t seed, double p_radius,
                                             double min_dp) {
  if (samples < 1 || !(p_radius > 0.0) || !(min_dp > 0.0) || min_dp > p_radius) {
    fail(ErrorCategory::kInvalidArgument, "selector probe: need samples >= 1, 0 < min_dp <= p_radius");
  }
  const int d = problem.dim;
  const Box& box = problem.training_domain;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal;
  SelectorProbeResult out;
  out.problem = problem.label;
  out.samples = samples;
  Eigen::VectorXd x(d), p1(d), u(d);
  for (long k = 0; k < samples; ++k) {
    const double t = problem.horizon * unit(rng);
    for (int i = 0; i < d; ++i) {
      x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * unit(rng);
      p1[i] = p_radius * (2.0 * unit(rng) - 1.0);
    }
    do {
      for (int i = 0; i < d; ++i) u[i] = normal(rng);
    } while (!(u.norm() > 0.0));
    const double s = min_dp * std::pow(p_radius / min_dp, unit(rng));
    const Eigen::VectorXd p2 = p1 + s * u.normalized();
    const double dp = (p1 - p2).norm();
    if (dp < min_dp * (1.0 - 1e-12)) continue;
    const double ratio = (selector(t, x, p1) - selector(t, x, p2)).norm() / dp;
    if (!std::isfinite(ratio)) fail(ErrorCategory::kNumerical, "selector probe: non-finite ratio");
    out.kappa_hat = std::max(out.kappa_hat, ratio);
  }
  return out;
}

FeedbackPolicy network_feedback(std::shared_ptr<const NetworkState> state, ValueForm form,
                                const GameProblem& problem, SelectorMode mode,
                                const MinimaxConfig& minimax, Disturbance disturbance) {
  if (!state) fail(ErrorCategory::kInvalidArgument, "feedback: missing network");
  const GameProblem* p = &problem;
  const Eigen::MatrixXd zero_a = Eigen::MatrixXd::Zero(problem.dim, problem.dim);
  return [state, form, p, mode, minimax, disturbance, zero_a](double t, VecRef x) {
    const ValueJet jet = value_jet(*state, t, x, zero_a, p->terminal, p->horizon, form);
    ControlPair c = select_controls(*p, mode, minimax, t, x, jet.grad_x);
    if (disturbance == Disturbance::kZero) {
      c.b = p->controls_b.project(Eigen::VectorXd::Zero(p->controls_b.dim()));
    }
    return c;
  };
}

Trajectory euler_maruyama(const GameProblem& problem, const FeedbackPolicy& policy, VecRef x0,
                          double dt, long steps, std::uint64_t seed, double t0) {
  if (!(dt > 0.0) || steps < 0) fail(ErrorCategory::kInvalidArgument, "euler_maruyama: need dt > 0, steps >= 0");
  if (x0.size() != problem.dim) fail(ErrorCategory::kInvalidArgument, "euler_maruyama: x0 has wrong size");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Trajectory out;
  out.t.resize(steps + 1);
  out.x.resize(problem.dim, steps + 1);
  out.t[0] = t0;
  out.x.col(0) = x0;
  const double sqrt_dt = std::sqrt(dt);
  Eigen::VectorXd xi;
  for (long k = 0; k < steps; ++k) {
    const double t = t0 + k * dt;
    const Eigen::VectorXd x = out.x.col(k);
    const ControlPair c = policy(t, x);
    const Eigen::MatrixXd s = problem.sigma(t, x);
    xi.resize(s.cols());
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal(rng);
    out.x.col(k + 1) = x + problem.drift(t, x, c.a, c.b) * dt + sqrt_dt * (s * xi);
    out.t[k + 1] = t0 + (k + 1) * dt;
    if (!out.x.col(k + 1).allFinite()) {
      fail(ErrorCategory::kNumerical, "euler_maruyama: state became non-finite");
    }
  }
  return out;
}

std::vector<Trajectory> euler_maruyama_paths(const GameProblem& problem,
                                             const FeedbackPolicy& policy, VecRef x0,
                                             double dt, long steps, long paths,
                                             std::uint64_t seed, int workers) {
  if (paths < 1) fail(ErrorCategory::kInvalidArgument, "euler_maruyama: need paths >= 1");
  std::vector<Trajectory> out(paths);
  const Eigen::VectorXd start = x0;
  parallel_for(paths, workers, [&](std::int64_t k) {
    out[k] = euler_maruyama(problem, policy, start, dt, steps,
                            derive_seed(seed, static_cast<std::uint64_t>(k)));
  });
  return out;
}

DecompositionStats decomposition_residual_check(const PairwiseReference& reference,
                                                const GameProblem& problem, long samples,
                                                std::uint64_t seed) {
  if (reference.params().anisotropy > 0.0) {
    fail(ErrorCategory::kInvalidArgument, "decomposition: anisotropic diffusion is not supported");
  }
  if (problem.dim != reference.dim()) fail(ErrorCategory::kInvalidArgument, "decomposition: dimension mismatch");
  if (!problem.has_closed_form_hamiltonian()) {
    fail(ErrorCategory::kInvalidArgument, "decomposition: problem needs a closed-form Hamiltonian");
  }
  if (samples < 1) fail(ErrorCategory::kInvalidArgument, "decomposition: need samples >= 1");
  const TimeGrid& pair = reference.pair_grid(1);
  if (pair.times.size() < 3) fail(ErrorCategory::kInvalidArgument, "decomposition: need >= 3 slices");
  const double h = std::min(pair.spacing(0), pair.spacing(1));
  const double ds = pair.times[1] - pair.times[0];
  const double T = problem.horizon;
  const PubSubParams& params = reference.params();
  const Eigen::MatrixXd sigma = params.noise * Eigen::MatrixXd::Identity(params.n, params.n);
  const GameProblem pair_problem = make_pubsub_pair_problem(params, sigma, 1);
  const ValueFn nd = [&](double t, VecRef x) { return reference.value(t, x); };
  const ValueFn two = [&](double t, VecRef x) { return interpolate(pair, t, x); };

  const Box& box = problem.target_domain;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  DecompositionStats out;
  out.samples = samples;
  double sum = 0.0, sum_pair = 0.0;
  Eigen::VectorXd x(problem.dim);
  for (long k = 0; k < samples; ++k) {
    const double t = ds + (T - 2.0 * ds) * unit(rng);
    for (int i = 0; i < problem.dim; ++i) {
      x[i] = box.lower[i] + (box.upper[i] - box.lower[i]) * unit(rng);
    }
    const double r = std::abs(fd_hji_residual(nd, problem, t, x, h, ds));
    sum += r;
    out.max_abs = std::max(out.max_abs, r);
    const Eigen::VectorXd xp = Eigen::Vector2d(x[0], x[1]);
    sum_pair += std::abs(fd_hji_residual(two, pair_problem, t, xp, h, ds));
  }
  out.mean_abs = sum / samples;
  out.truncation = sum_pair / samples;
  out.ratio = out.truncation > 0.0 ? out.mean_abs / out.truncation
                                   : (out.mean_abs > 0.0 ? std::numeric_limits<double>::infinity() : 1.0);
  return out;
}

void write_errors_csv(const std::vector<ErrorReport>& reports, const std::string& path) {
  std::ofstream out = open_csv(path);
  out << "problem,method,t,rel_l2,mse\n";
  for (const ErrorReport& r : reports) {
    for (const SliceError& s : r.slices) {
      out << r.problem << ',' << r.method << ',' << format_double(s.t) << ','
          << format_double(s.rel_l2) << ',' << format_double(s.mse) << '\n';
    }
  }
  finish(out, path);
}

void write_error_table_csv(const std::vector<ErrorReport>& reports, const std::string& path) {
  std::vector<double> times;
  for (const ErrorReport& r : reports) {
    for (const SliceError& s : r.slices) times.push_back(s.t);
  }
  times = sorted_times(std::move(times));
  std::ofstream out = open_csv(path);
  out << "problem,method,metric";
  for (double t : times) out << ",t=" << format_double(t);
  out << '\n';
  for (const ErrorReport& r : reports) {
    for (const char* metric : {"rel_l2", "mse"}) {
      out << r.problem << ',' << r.method << ',' << metric;
      for (double t : times) {
        out << ',';
        for (const SliceError& s : r.slices) {
          if (s.t == t) out << format_double(metric[0] == 'r' ? s.rel_l2 : s.mse);
        }
      }
      out << '\n';
    }
  }
  finish(out, path);
}

void write_rates_csv(const RateFit& fit, const std::string& path) {
  std::ofstream out = open_csv(path);
  out << "iteration,E_n\n";
  for (std::size_t k = 0; k < fit.changes.size(); ++k) {
    out << fit.iterations[k] << ',' << format_double(fit.changes[k]) << '\n';
  }
  finish(out, path);
}

void write_probes_csv(const std::vector<SelectorProbeResult>& probes, const std::string& path) {
  std::ofstream out = open_csv(path);
  out << "problem,kappa_hat,n_samples\n";
  for (const SelectorProbeResult& p : probes) {
    out << p.problem << ',' << format_double(p.kappa_hat) << ',' << p.samples << '\n';
  }
  finish(out, path);
}

void write_trajectories_csv(const std::vector<Trajectory>& paths, const std::string& path) {
  std::ofstream out = open_csv(path);
  const Eigen::Index d = paths.empty() ? 0 : paths.front().x.rows();
  out << "path_id,step,t";
  for (Eigen::Index i = 0; i < d; ++i) out << ",x" << i;
  out << '\n';
  for (std::size_t k = 0; k < paths.size(); ++k) {
    const Trajectory& tr = paths[k];
    for (Eigen::Index s = 0; s < tr.t.size(); ++s) {
      out << k << ',' << s << ',' << format_double(tr.t[s]);
      for (Eigen::Index i = 0; i < d; ++i) out << ',' << format_double(tr.x(i, s));
      out << '\n';
    }
  }
  finish(out, path);
}

void emit_report(const std::vector<ErrorReport>& reports, const std::vector<RateFit>& fits,
                 const std::vector<SelectorProbeResult>& probes, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) fail(ErrorCategory::kIo, "cannot create output directory '" + dir + "'");
  const fs::path base(dir);
  write_errors_csv(reports, (base / "errors.csv").string());
  write_error_table_csv(reports, (base / "table.csv").string());
  if (fits.size() == 1) {
    write_rates_csv(fits.front(), (base / "rates.csv").string());
  } else if (fits.empty()) {
    write_rates_csv(RateFit{}, (base / "rates.csv").string());
  } else {
    for (std::size_t k = 0; k < fits.size(); ++k) {
      const std::string label = fits[k].label.empty() ? std::to_string(k) : fits[k].label;
      write_rates_csv(fits[k], (base / ("rates_" + label + ".csv")).string());
    }
  }
  write_probes_csv(probes, (base / "probes.csv").string());

  const std::string path = (base / "summary.txt").string();
  std::ofstream out = open_csv(path);
  out << "error reports: " << reports.size() << '\n';
  for (const ErrorReport& r : reports) {
    out << "  " << r.problem << " / " << r.method << " on " << r.grid.describe() << '\n';
    for (const SliceError& s : r.slices) {
      out << "    t=" << format_double(s.t) << " rel_l2=" << format_double(s.rel_l2)
          << " mse=" << format_double(s.mse) << '\n';
    }
  }
  out << "rate fits: " << fits.size() << '\n';
  for (const RateFit& f : fits) {
    out << "  " << (f.label.empty() ? "fit" : f.label) << ": slope=" << format_double(f.slope)
        << " rho=" << format_double(f.rho()) << " r2=" << format_double(f.r_squared)
        << " points=" << f.changes.size() << '\n';
  }
  out << "selector probes: " << probes.size() << '\n';
  for (const SelectorProbeResult& p : probes) {
    out << "  " << p.problem << ": kappa_hat=" << format_double(p.kappa_hat)
        << " samples=" << p.samples << '\n';
  }
  finish(out, path);
}

}  // namespace hjipi
