#include "hjipi/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <sstream>
#include <utility>

namespace hjipi {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& what) {
  fail(ErrorCategory::kConfig, what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Read access to one JSON object with key checking and typed getters.
class Section {
 public:
  Section(const Json* node, std::string path) : node_(node), path_(std::move(path)) {
    if (node_ != nullptr && !node_->is_object()) config_error("'" + path_ + "' must be an object");
  }

  void allow(std::initializer_list<const char*> keys) const {
    if (node_ == nullptr) return;
    for (auto it = node_->begin(); it != node_->end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) config_error("unknown key '" + join(path_, it.key()) + "'");
    }
  }

  bool has(const char* key) const { return node_ != nullptr && node_->contains(key); }
  const Json* get(const char* key) const { return has(key) ? &node_->at(key) : nullptr; }
  Section child(const char* key) const { return Section(get(key), join(path_, key)); }
  std::string path(const char* key) const { return join(path_, key); }

  double number(const char* key, double fallback) const {
    const Json* v = get(key);
    if (v == nullptr) return fallback;
    if (!v->is_number()) config_error("'" + path(key) + "' must be a number");
    const double x = v->get<double>();
    if (!std::isfinite(x)) config_error("'" + path(key) + "' must be finite");
    return x;
  }

  long long integer(const char* key, long long fallback) const {
    const Json* v = get(key);
    if (v == nullptr) return fallback;
    if (v->is_number_integer()) return v->get<long long>();
    if (v->is_number_float()) {
      const double x = v->get<double>();
      if (std::isfinite(x) && x == std::floor(x) && std::abs(x) < 9.0e15) return static_cast<long long>(x);
    }
    config_error("'" + path(key) + "' must be an integer");
  }

  std::uint64_t unsigned_integer(const char* key, std::uint64_t fallback) const {
    const Json* v = get(key);
    if (v == nullptr) return fallback;
    if (v->is_number_unsigned()) return v->get<std::uint64_t>();
    const long long x = integer(key, 0);
    if (x < 0) config_error("'" + path(key) + "' must be non-negative");
    return static_cast<std::uint64_t>(x);
  }

  bool boolean(const char* key, bool fallback) const {
    const Json* v = get(key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) config_error("'" + path(key) + "' must be true or false");
    return v->get<bool>();
  }

  std::string string(const char* key, const std::string& fallback) const {
    const Json* v = get(key);
    if (v == nullptr) return fallback;
    if (!v->is_string()) config_error("'" + path(key) + "' must be a string");
    return v->get<std::string>();
  }

  std::vector<double> numbers(const char* key, std::vector<double> fallback) const {
    const Json* v = get(key);
    if (v == nullptr) return fallback;
    if (v->is_number()) return {v->get<double>()};
    if (!v->is_array()) config_error("'" + path(key) + "' must be a number or an array of numbers");
    std::vector<double> out;
    for (const Json& e : *v) {
      if (!e.is_number()) config_error("'" + path(key) + "' must contain numbers only");
      out.push_back(e.get<double>());
    }
    return out;
  }

  template <typename Enum>
  Enum choice(const char* key, Enum fallback,
              std::initializer_list<std::pair<const char*, Enum>> options) const {
    if (!has(key)) return fallback;
    const std::string s = string(key, "");
    std::string names;
    for (const auto& [name, value] : options) {
      if (s == name) return value;
      names += names.empty() ? name : std::string(", ") + name;
    }
    config_error("'" + path(key) + "' must be one of " + names + ", got '" + s + "'");
  }

 private:
  const Json* node_;
  std::string path_;
};

Eigen::VectorXd broadcast(const std::vector<double>& v, int dim, const std::string& what) {
  if (v.size() == 1) return Eigen::VectorXd::Constant(dim, v.front());
  if (static_cast<int>(v.size()) != dim) {
    config_error("'" + what + "' needs 1 or " + std::to_string(dim) + " entries, got " +
                 std::to_string(v.size()));
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Box read_box(const Section& parent, const char* key, const Box& fallback) {
  if (!parent.has(key)) return fallback;
  const Section s = parent.child(key);
  s.allow({"lower", "upper"});
  const int dim = fallback.dim();
  Box b;
  b.lower = broadcast(s.numbers("lower", to_std(fallback.lower)), dim, s.path("lower"));
  b.upper = broadcast(s.numbers("upper", to_std(fallback.upper)), dim, s.path("upper"));
  if (!(b.lower.array() < b.upper.array()).all()) {
    config_error("'" + parent.path(key) + "' needs lower < upper on every axis");
  }
  return b;
}

Json box_json(const Box& b) { return Json{{"lower", to_std(b.lower)}, {"upper", to_std(b.upper)}}; }

int checked_int(long long v, const std::string& what, long long lo) {
  if (v < lo || v > std::numeric_limits<int>::max()) {
    config_error("'" + what + "' must be at least " + std::to_string(lo));
  }
  return static_cast<int>(v);
}

void apply_override(Json& root, const ConfigOverride& o) {
  if (o.key.empty()) config_error("override with an empty key");
  Json* node = &root;
  std::string::size_type start = 0;
  while (true) {
    const auto dot = o.key.find('.', start);
    const std::string part = o.key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) config_error("malformed override key '" + o.key + "'");
    if (!node->is_object()) config_error("override '" + o.key + "' descends into a non-object");
    if (dot == std::string::npos) {
      Json value;
      try {
        value = Json::parse(o.value);
      } catch (const Json::parse_error&) {
        value = o.value;
      }
      (*node)[part] = std::move(value);
      return;
    }
    Json& next = (*node)[part];
    if (next.is_null()) next = Json::object();
    node = &next;
    start = dot + 1;
  }
}

void read_problem(const Section& s, ProblemSection& p) {
  p.kind = s.choice<ProblemKind>("kind", ProblemKind::kPathPlanning,
                                 {{"path_planning", ProblemKind::kPathPlanning},
                                  {"pubsub", ProblemKind::kPubSub}});
  if (p.kind == ProblemKind::kPathPlanning) {
    s.allow({"kind", "lambda1", "lambda2", "lambda3", "delta", "epsilon", "goal", "noise",
             "horizon", "domain", "target"});
    PathPlanningParams& q = p.path_planning;
    q.lambda1 = s.number("lambda1", q.lambda1);
    q.lambda2 = s.number("lambda2", q.lambda2);
    q.lambda3 = s.number("lambda3", q.lambda3);
    q.delta = s.number("delta", q.delta);
    q.epsilon = s.number("epsilon", q.epsilon);
    q.goal = broadcast(s.numbers("goal", {q.goal[0], q.goal[1]}), 2, s.path("goal"));
    q.noise = s.number("noise", q.noise);
    q.horizon = s.number("horizon", q.horizon);
    q.validate();
  } else {
    s.allow({"kind", "n", "a", "b", "c", "alpha", "beta", "r", "noise", "anisotropy",
             "sigma_seed", "horizon", "domain", "target"});
    PubSubParams& q = p.pubsub;
    q.n = checked_int(s.integer("n", q.n), s.path("n"), 2);
    q.a = s.number("a", q.a);
    q.b = s.number("b", q.b);
    q.c = s.number("c", q.c);
    q.alpha = s.number("alpha", q.alpha);
    q.beta = s.number("beta", q.beta);
    q.r = s.number("r", q.r);
    q.noise = s.number("noise", q.noise);
    q.anisotropy = s.number("anisotropy", q.anisotropy);
    q.sigma_seed = s.unsigned_integer("sigma_seed", q.sigma_seed);
    q.horizon = s.number("horizon", q.horizon);
    q.validate();
  }
  const GameProblem base = p.kind == ProblemKind::kPathPlanning
                               ? make_path_planning_problem(p.path_planning)
                               : make_pubsub_problem(p.pubsub);
  p.domain = read_box(s, "domain", base.training_domain);
  p.target = read_box(s, "target", base.target_domain);
}

void read_minimax(const Section& s, MinimaxConfig& m) {
  s.allow({"step", "max_iterations", "tolerance", "fd_step"});
  m.step = s.number("step", m.step);
  m.max_iterations = checked_int(s.integer("max_iterations", m.max_iterations), s.path("max_iterations"), 1);
  m.tolerance = s.number("tolerance", m.tolerance);
  m.fd_step = s.number("fd_step", m.fd_step);
  m.validate();
}

void read_training(const Section& s, RunConfig& c) {
  s.allow({"epochs", "updates", "resample_interval", "tol", "collocation", "terminal_points",
           "validation", "residual_samples", "hidden", "learning_rate", "beta1", "beta2",
           "adam_epsilon", "form", "selector", "minimax", "precision", "chunk_size",
           "checkpoints"});
  PITrainConfig& t = c.training;
  t.epochs = checked_int(s.integer("epochs", t.epochs), s.path("epochs"), 0);
  t.updates = checked_int(s.integer("updates", t.updates), s.path("updates"), 1);
  t.resample_interval =
      checked_int(s.integer("resample_interval", t.resample_interval), s.path("resample_interval"), 1);
  t.tol = s.number("tol", t.tol);
  t.collocation = checked_int(s.integer("collocation", t.collocation), s.path("collocation"), 1);
  t.terminal_points =
      checked_int(s.integer("terminal_points", t.terminal_points), s.path("terminal_points"), 0);
  t.validation = checked_int(s.integer("validation", t.validation), s.path("validation"), 1);
  t.residual_samples =
      checked_int(s.integer("residual_samples", t.residual_samples), s.path("residual_samples"), 1);
  if (s.has("hidden")) {
    t.hidden.clear();
    for (double w : s.numbers("hidden", {})) {
      if (w < 1 || w != std::floor(w)) config_error("'" + s.path("hidden") + "' must hold positive integers");
      t.hidden.push_back(static_cast<int>(w));
    }
  }
  t.adam.learning_rate = s.number("learning_rate", t.adam.learning_rate);
  t.adam.beta1 = s.number("beta1", t.adam.beta1);
  t.adam.beta2 = s.number("beta2", t.adam.beta2);
  t.adam.epsilon = s.number("adam_epsilon", t.adam.epsilon);
  t.form = s.choice<ValueForm>("form", t.form, {{"ansatz", ValueForm::kAnsatz}, {"plain", ValueForm::kPlain}});
  t.selector = s.choice<SelectorMode>(
      "selector", t.selector, {{"closed_form", SelectorMode::kClosedForm}, {"numeric", SelectorMode::kNumeric}});
  read_minimax(s.child("minimax"), t.minimax);
  t.engine.precision = s.choice<Precision>(
      "precision", t.engine.precision, {{"float32", Precision::kFloat32}, {"float64", Precision::kFloat64}});
  if (const Json* v = s.get("chunk_size"); v != nullptr && v->is_string()) {
    if (v->get<std::string>() != "auto") config_error("'" + s.path("chunk_size") + "' must be an integer or \"auto\"");
    if (c.deterministic) {
      config_error("contradictory settings: deterministic mode needs a fixed 'training.chunk_size'");
    }
    const Eigen::Index w = std::max(1, c.workers);
    t.engine.chunk_size = std::max<Eigen::Index>(1, (t.collocation + w - 1) / w);
  } else {
    t.engine.chunk_size = checked_int(s.integer("chunk_size", t.engine.chunk_size), s.path("chunk_size"), 1);
  }
  c.checkpoints = s.boolean("checkpoints", c.checkpoints);
  if (t.form == ValueForm::kPlain && t.terminal_points == 0) {
    config_error("contradictory settings: 'training.form' plain needs 'training.terminal_points' > 0");
  }
}

void read_fdm(const Section& s, RunConfig& c) {
  s.allow({"extended", "target", "points", "steps_requested", "saved_slices", "safety",
           "blowup_factor", "binary"});
  FDMConfig& f = c.fdm;
  f.extended = read_box(s, "extended", f.extended);
  f.target = read_box(s, "target", f.target);
  f.points = checked_int(s.integer("points", f.points), s.path("points"), 3);
  f.steps_requested = s.integer("steps_requested", f.steps_requested);
  f.saved_slices = checked_int(s.integer("saved_slices", f.saved_slices), s.path("saved_slices"), 2);
  f.safety = s.number("safety", f.safety);
  f.blowup_factor = s.number("blowup_factor", f.blowup_factor);
  c.binary_grid = s.boolean("binary", c.binary_grid);
}

void read_compare(const Section& s, RunConfig& c, double horizon) {
  s.allow({"network", "reference", "times", "method", "samples", "interpolation"});
  CompareSection& k = c.compare;
  k.network = s.string("network", k.network);
  k.reference = s.string("reference", k.reference);
  k.times = s.numbers("times", {0.0, 0.25 * horizon, 0.5 * horizon, 0.75 * horizon});
  for (double t : k.times) {
    if (t < 0.0 || t > horizon) config_error("'" + s.path("times") + "' must lie in [0, horizon]");
  }
  k.method = s.string("method", k.method);
  if (k.method.empty()) config_error("'" + s.path("method") + "' must not be empty");
  k.samples = checked_int(s.integer("samples", k.samples), s.path("samples"), 1);
  k.interpolation = s.choice<TimeInterpolation>(
      "interpolation", k.interpolation,
      {{"linear", TimeInterpolation::kLinear}, {"nearest", TimeInterpolation::kNearest}});
}

void read_trajectories(const Section& s, RunConfig& c) {
  s.allow({"network", "x0", "dt", "steps", "paths", "disturbance"});
  TrajectorySection& k = c.trajectories;
  const Box& target = c.problem.target;
  const Eigen::VectorXd x0_default = target.center() - 0.4 * target.extent();
  k.network = s.string("network", k.network);
  k.x0 = broadcast(s.numbers("x0", to_std(x0_default)), target.dim(), s.path("x0"));
  k.dt = s.number("dt", k.dt);
  if (!(k.dt > 0.0)) config_error("'" + s.path("dt") + "' must be positive");
  const double horizon = c.problem.kind == ProblemKind::kPathPlanning ? c.problem.path_planning.horizon
                                                                       : c.problem.pubsub.horizon;
  const long default_steps = std::max(1L, std::lround(horizon / k.dt));
  k.steps = s.integer("steps", default_steps);
  if (k.steps < 1) config_error("'" + s.path("steps") + "' must be at least 1");
  k.paths = s.integer("paths", k.paths);
  if (k.paths < 1) config_error("'" + s.path("paths") + "' must be at least 1");
  k.disturbance = s.choice<Disturbance>(
      "disturbance", k.disturbance, {{"adversarial", Disturbance::kAdversarial}, {"zero", Disturbance::kZero}});
}

void read_probe(const Section& s, RunConfig& c) {
  s.allow({"samples", "p_radius", "min_dp", "component"});
  ProbeSection& k = c.probe;
  k.samples = s.integer("samples", k.samples);
  if (k.samples < 1) config_error("'" + s.path("samples") + "' must be at least 1");
  k.p_radius = s.number("p_radius", k.p_radius);
  k.min_dp = s.number("min_dp", k.min_dp);
  if (!(k.p_radius > 0.0) || !(k.min_dp > 0.0) || k.min_dp > k.p_radius) {
    config_error("'probe' needs 0 < min_dp <= p_radius");
  }
  k.component = s.choice<SelectorComponent>(
      "component", k.component,
      {{"a", SelectorComponent::kA}, {"b", SelectorComponent::kB}, {"both", SelectorComponent::kBoth}});
}

const char* enum_name(ValueForm f) { return f == ValueForm::kAnsatz ? "ansatz" : "plain"; }
const char* enum_name(SelectorMode m) { return m == SelectorMode::kClosedForm ? "closed_form" : "numeric"; }
const char* enum_name(Precision p) { return p == Precision::kFloat32 ? "float32" : "float64"; }
const char* enum_name(TimeInterpolation m) { return m == TimeInterpolation::kLinear ? "linear" : "nearest"; }
const char* enum_name(Disturbance d) { return d == Disturbance::kAdversarial ? "adversarial" : "zero"; }
const char* enum_name(SelectorComponent c) {
  switch (c) {
    case SelectorComponent::kA: return "a";
    case SelectorComponent::kB: return "b";
    case SelectorComponent::kBoth: return "both";
  }
  return "a";
}

}  // namespace

const char* subcommand_name(Subcommand sub) {
  switch (sub) {
    case Subcommand::kSolvePinnPi: return "solve-pinn-pi";
    case Subcommand::kSolveDirect: return "solve-direct";
    case Subcommand::kSolveFdm: return "solve-fdm";
    case Subcommand::kCompare: return "compare";
    case Subcommand::kTrajectories: return "trajectories";
    case Subcommand::kProbeTheory: return "probe-theory";
  }
  return "?";
}

Subcommand parse_subcommand(const std::string& name) {
  for (Subcommand s : {Subcommand::kSolvePinnPi, Subcommand::kSolveDirect, Subcommand::kSolveFdm,
                       Subcommand::kCompare, Subcommand::kTrajectories, Subcommand::kProbeTheory}) {
    if (name == subcommand_name(s)) return s;
  }
  fail(ErrorCategory::kInvalidArgument, "unknown subcommand '" + name + "'");
}

int ProblemSection::dim() const { return kind == ProblemKind::kPathPlanning ? 2 : pubsub.n; }

std::string ProblemSection::label() const {
  return kind == ProblemKind::kPathPlanning ? "path_planning" : "pubsub_" + std::to_string(pubsub.n) + "d";
}

namespace {

RunConfig parse_tree(Subcommand sub, const std::string& text,
                     const std::vector<ConfigOverride>& overrides) {
  Json root = Json::object();
  if (!text.empty()) {
    try {
      root = Json::parse(text, nullptr, true, true);
    } catch (const Json::parse_error& e) {
      config_error(std::string("malformed file: ") + e.what());
    }
    if (root.is_null()) root = Json::object();
  }
  if (!root.is_object()) config_error("top level must be an object");
  for (const ConfigOverride& o : overrides) apply_override(root, o);

  const Section top(&root, "");
  top.allow({"problem", "training", "fdm", "compare", "trajectories", "probe", "seed", "out",
             "workers", "deterministic"});
  RunConfig c;
  c.subcommand = sub;
  c.seed = top.unsigned_integer("seed", c.seed);
  c.out = top.string("out", c.out);
  if (c.out.empty()) config_error("'out' must not be empty");
  c.workers = checked_int(top.integer("workers", c.workers), "workers", 1);
  c.deterministic = top.boolean("deterministic", c.deterministic);

  read_problem(top.child("problem"), c.problem);
  const bool path = c.problem.kind == ProblemKind::kPathPlanning;
  const double horizon = path ? c.problem.path_planning.horizon : c.problem.pubsub.horizon;

  c.training = path ? PITrainConfig::path_planning_defaults()
                    : PITrainConfig::pubsub_defaults(c.problem.pubsub.n);
  read_training(top.child("training"), c);
  c.training.seed = c.seed;
  c.training.engine.workers = c.workers;

  c.fdm = path ? FDMConfig::path_planning_defaults() : FDMConfig::pubsub_defaults();
  read_fdm(top.child("fdm"), c);
  c.fdm.workers = c.workers;

  read_compare(top.child("compare"), c, horizon);
  read_trajectories(top.child("trajectories"), c);
  read_probe(top.child("probe"), c);

  c.training.validate();
  c.fdm.validate();
  if (!c.problem.domain.contains(c.problem.target)) {
    config_error("'problem.target' must lie inside 'problem.domain'");
  }
  return c;
}

}  // namespace

RunConfig parse_config(Subcommand sub, const std::string& text,
                       const std::vector<ConfigOverride>& overrides) {
  try {
    return parse_tree(sub, text, overrides);
  } catch (const Error& e) {
    if (e.category() != ErrorCategory::kInvalidArgument) throw;
    config_error(e.what());
  }
}

RunConfig load_config(Subcommand sub, const std::string& path,
                      const std::vector<ConfigOverride>& overrides) {
  std::string text;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::kMissingInput, "config: cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  return parse_config(sub, text, overrides);
}

std::string config_to_json(const RunConfig& c) {
  Json problem;
  if (c.problem.kind == ProblemKind::kPathPlanning) {
    const PathPlanningParams& q = c.problem.path_planning;
    problem = Json{{"kind", "path_planning"}, {"lambda1", q.lambda1}, {"lambda2", q.lambda2},
                   {"lambda3", q.lambda3},    {"delta", q.delta},     {"epsilon", q.epsilon},
                   {"goal", {q.goal[0], q.goal[1]}}, {"noise", q.noise}, {"horizon", q.horizon}};
  } else {
    const PubSubParams& q = c.problem.pubsub;
    problem = Json{{"kind", "pubsub"},     {"n", q.n},         {"a", q.a},
                   {"b", q.b},             {"c", q.c},         {"alpha", q.alpha},
                   {"beta", q.beta},       {"r", q.r},         {"noise", q.noise},
                   {"anisotropy", q.anisotropy}, {"sigma_seed", q.sigma_seed}, {"horizon", q.horizon}};
  }
  problem["domain"] = box_json(c.problem.domain);
  problem["target"] = box_json(c.problem.target);

  const PITrainConfig& t = c.training;
  const Json training{{"epochs", t.epochs},
                      {"updates", t.updates},
                      {"resample_interval", t.resample_interval},
                      {"tol", t.tol},
                      {"collocation", t.collocation},
                      {"terminal_points", t.terminal_points},
                      {"validation", t.validation},
                      {"residual_samples", t.residual_samples},
                      {"hidden", t.hidden},
                      {"learning_rate", t.adam.learning_rate},
                      {"beta1", t.adam.beta1},
                      {"beta2", t.adam.beta2},
                      {"adam_epsilon", t.adam.epsilon},
                      {"form", enum_name(t.form)},
                      {"selector", enum_name(t.selector)},
                      {"minimax",
                       {{"step", t.minimax.step},
                        {"max_iterations", t.minimax.max_iterations},
                        {"tolerance", t.minimax.tolerance},
                        {"fd_step", t.minimax.fd_step}}},
                      {"precision", enum_name(t.engine.precision)},
                      {"chunk_size", t.engine.chunk_size},
                      {"checkpoints", c.checkpoints}};

  const FDMConfig& f = c.fdm;
  const Json fdm{{"extended", box_json(f.extended)},
                 {"target", box_json(f.target)},
                 {"points", f.points},
                 {"steps_requested", f.steps_requested},
                 {"saved_slices", f.saved_slices},
                 {"safety", f.safety},
                 {"blowup_factor", f.blowup_factor},
                 {"binary", c.binary_grid}};

  const Json compare{{"network", c.compare.network},
                     {"reference", c.compare.reference},
                     {"times", c.compare.times},
                     {"method", c.compare.method},
                     {"samples", c.compare.samples},
                     {"interpolation", enum_name(c.compare.interpolation)}};

  const Json trajectories{{"network", c.trajectories.network},
                          {"x0", to_std(c.trajectories.x0)},
                          {"dt", c.trajectories.dt},
                          {"steps", c.trajectories.steps},
                          {"paths", c.trajectories.paths},
                          {"disturbance", enum_name(c.trajectories.disturbance)}};

  const Json probe{{"samples", c.probe.samples},
                   {"p_radius", c.probe.p_radius},
                   {"min_dp", c.probe.min_dp},
                   {"component", enum_name(c.probe.component)}};

  const Json root{{"problem", problem},
                  {"training", training},
                  {"fdm", fdm},
                  {"compare", compare},
                  {"trajectories", trajectories},
                  {"probe", probe},
                  {"seed", c.seed},
                  {"out", c.out},
                  {"workers", c.workers},
                  {"deterministic", c.deterministic}};
  return root.dump(2);
}

GameProblem make_problem(const ProblemSection& section) {
  GameProblem p = section.kind == ProblemKind::kPathPlanning ? make_path_planning_problem(section.path_planning)
                                                             : make_pubsub_problem(section.pubsub);
  p.training_domain = section.domain;
  p.target_domain = section.target;
  p.validate();
  return p;
}

}  // namespace hjipi
