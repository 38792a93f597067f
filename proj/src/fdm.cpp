#include "hjipi/fdm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "format.hpp"

namespace hjipi {

namespace {

constexpr char kBinaryMagic[4] = {'H', 'J', 'G', 'B'};
constexpr std::uint32_t kFormatVersion = 1;

// Points of a control set that bound an affine drift: center, the axis
// extremes and, for small boxes, every corner.
std::vector<Eigen::VectorXd> extreme_controls(const ControlSet& set) {
  std::vector<Eigen::VectorXd> out{set.center()};
  const int m = set.dim();
  for (int i = 0; i < m; ++i) {
    for (double s : {-1.0, 1.0}) {
      Eigen::VectorXd u = set.center();
      u[i] += s * 0.5 * (set.upper()[i] - set.lower()[i]);
      out.push_back(u);
    }
  }
  if (set.kind() == ControlSet::Kind::kBox && m <= 6) {
    for (int mask = 0; mask < (1 << m); ++mask) {
      Eigen::VectorXd u(m);
      for (int i = 0; i < m; ++i) u[i] = (mask >> i) & 1 ? set.upper()[i] : set.lower()[i];
      out.push_back(u);
    }
  }
  return out;
}

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) fail(ErrorCategory::kIo, "grid: truncated binary stream");
  return v;
}

}  // namespace

double TimeGrid::spacing(int axis) const {
  return (extent.upper[axis] - extent.lower[axis]) / (points.at(axis) - 1);
}

Eigen::Index TimeGrid::num_nodes() const {
  Eigen::Index n = 1;
  for (int p : points) n *= p;
  return n;
}

Eigen::Index TimeGrid::flat_index(const std::vector<int>& idx) const {
  Eigen::Index flat = 0;
  for (int k = 0; k < dim(); ++k) flat = flat * points[k] + idx[k];
  return flat;
}

std::vector<int> TimeGrid::unflatten(Eigen::Index flat) const {
  std::vector<int> idx(points.size());
  for (int k = dim() - 1; k >= 0; --k) {
    idx[k] = static_cast<int>(flat % points[k]);
    flat /= points[k];
  }
  return idx;
}

Eigen::VectorXd TimeGrid::node(Eigen::Index flat) const {
  const std::vector<int> idx = unflatten(flat);
  Eigen::VectorXd x(dim());
  for (int k = 0; k < dim(); ++k) {
    x[k] = idx[k] == points[k] - 1 ? extent.upper[k]
                                   : extent.lower[k] + idx[k] * spacing(k);
  }
  return x;
}

int TimeGrid::slice_at(double t, double tol) const {
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (std::abs(times[k] - t) <= tol) return static_cast<int>(k);
  }
  return -1;
}

void TimeGrid::validate() const {
  extent.validate();
  if (static_cast<int>(points.size()) != extent.dim()) {
    fail(ErrorCategory::kInvalidArgument, "grid: axis count mismatch");
  }
  for (int p : points) {
    if (p < 2) fail(ErrorCategory::kInvalidArgument, "grid: need >= 2 points per axis");
  }
  if (times.size() != slices.size() || times.empty()) {
    fail(ErrorCategory::kInvalidArgument, "grid: times and slices disagree");
  }
  for (std::size_t k = 0; k < slices.size(); ++k) {
    if (slices[k].size() != num_nodes()) {
      fail(ErrorCategory::kInvalidArgument, "grid: slice has wrong length");
    }
    if (k > 0 && !(times[k] > times[k - 1])) {
      fail(ErrorCategory::kInvalidArgument, "grid: times must increase");
    }
  }
}

void FDMConfig::validate() const {
  extended.validate();
  target.validate();
  if (!extended.contains(target, 1e-12)) {
    fail(ErrorCategory::kInvalidArgument, "fdm: target must lie inside the extended domain");
  }
  if (points < 3 || saved_slices < 2 || steps_requested < 0) {
    fail(ErrorCategory::kInvalidArgument,
         "fdm: need points >= 3, saved_slices >= 2, steps_requested >= 0");
  }
  if (!(safety > 0.0 && safety <= 1.0) || !(blowup_factor > 1.0) || workers < 1) {
    fail(ErrorCategory::kInvalidArgument,
         "fdm: safety in (0, 1], blowup_factor > 1, workers >= 1");
  }
}

FDMConfig FDMConfig::path_planning_defaults() {
  FDMConfig c;
  c.extended = Box::cube(2, -2.0, 2.0);
  c.target = Box::cube(2, -1.0, 1.0);
  c.points = 201;
  return c;
}

FDMConfig FDMConfig::pubsub_defaults() {
  FDMConfig c;
  c.extended = Box::cube(2, -1.5, 1.5);
  c.target = Box::cube(2, -0.5, 0.5);
  c.points = 151;
  return c;
}

StepPlan plan_steps(const GameProblem& problem, const FDMConfig& config) {
  config.validate();
  if (problem.dim != 2) fail(ErrorCategory::kInvalidArgument, "fdm: problem must be 2-D");
  const double T = problem.horizon;
  StepPlan plan;
  const Eigen::Vector2d dx = config.extended.extent() / (config.points - 1);
  plan.dx_min = dx.minCoeff();
  plan.dt_dx2 = plan.dx_min * plan.dx_min;

  // Diffusion and drift bounds over nodes and a few times.
  const auto ca = extreme_controls(problem.controls_a);
  const auto cb = extreme_controls(problem.controls_b);
  double diag_max = 0.0, lambda_min = std::numeric_limits<double>::infinity();
  double speed2 = 0.0;
  const int stride = std::max(1, config.points / 51);
  Eigen::Vector2d x;
  for (double t : {0.0, 0.5 * T, T}) {
    for (int i = 0; i < config.points; i += stride) {
      for (int j = 0; j < config.points; j += stride) {
        x << config.extended.lower[0] + i * dx[0], config.extended.lower[1] + j * dx[1];
        if (!problem.constant_diffusion || (i == 0 && j == 0 && t == 0.0)) {
          const DiffusionSpec spec = DiffusionSpec::from_sigma(problem.sigma(t, x));
          diag_max = std::max(diag_max, spec.a.diagonal().sum());
          lambda_min = std::min(lambda_min, spec.min_eigenvalue());
        }
        for (const auto& a : ca) {
          for (const auto& b : cb) {
            speed2 = std::max(speed2, problem.drift(t, x, a, b).squaredNorm());
          }
        }
      }
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  plan.dt_diffusion = diag_max > 0.0 ? plan.dt_dx2 / diag_max : inf;
  // Central advection is stable only with enough diffusion; without any, fall
  // back to the upwind CFL bound.
  if (speed2 == 0.0) {
    plan.dt_advection = inf;
  } else if (lambda_min > 0.0) {
    plan.dt_advection = config.safety * lambda_min / speed2;
  } else {
    plan.dt_advection = config.safety * plan.dx_min / std::sqrt(speed2);
  }
  double dt_max = std::min({plan.dt_dx2, plan.dt_diffusion, plan.dt_advection});
  if (config.steps_requested > 0) dt_max = std::min(dt_max, T / config.steps_requested);
  const long per = config.saved_slices - 1;
  plan.steps_per_slice = static_cast<long>(std::ceil(T / dt_max / per - 1e-12));
  plan.steps_per_slice = std::max(1L, plan.steps_per_slice);
  plan.steps = plan.steps_per_slice * per;
  plan.dt = T / plan.steps;
  return plan;
}

TimeGrid fdm_solve_2d(const GameProblem& problem, const FDMConfig& config) {
  problem.validate();
  if (!problem.has_closed_form_hamiltonian()) {
    fail(ErrorCategory::kInvalidArgument, "fdm: problem needs a closed-form Hamiltonian");
  }
  const StepPlan plan = plan_steps(problem, config);
  const int n = config.points;
  const double T = problem.horizon;
  TimeGrid grid;
  grid.extent = config.extended;
  grid.points = {n, n};
  grid.dt = plan.dt;
  grid.steps = plan.steps;
  const double dx0 = grid.spacing(0), dx1 = grid.spacing(1);
  auto coord = [&](int axis, int i) {
    return i == n - 1 ? grid.extent.upper[axis]
                      : grid.extent.lower[axis] + i * grid.spacing(axis);
  };

  Eigen::VectorXd v(static_cast<Eigen::Index>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      v[i * n + j] = problem.terminal.value(Eigen::Vector2d(coord(0, i), coord(1, j)));
    }
  }
  const double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
  Eigen::Matrix2d a_const = Eigen::Matrix2d::Zero();
  if (problem.constant_diffusion) {
    const Eigen::MatrixXd s = problem.sigma(0.0, Eigen::Vector2d::Zero());
    a_const = s * s.transpose();
  }

  std::vector<double> times{T};
  std::vector<Eigen::VectorXd> slices{v};
  Eigen::VectorXd next(v.size());
  for (long s = plan.steps - 1; s >= 0; --s) {
    const double t_next = T * static_cast<double>(s + 1) / static_cast<double>(plan.steps);
    parallel_for(n, config.workers, [&](std::int64_t ii) {
      const int i = static_cast<int>(ii);
      const int im = i > 0 ? i - 1 : 1;
      const int ip = i < n - 1 ? i + 1 : n - 2;
      Eigen::Vector2d x, p;
      for (int j = 0; j < n; ++j) {
        const int jm = j > 0 ? j - 1 : 1;
        const int jp = j < n - 1 ? j + 1 : n - 2;
        const double c = v[i * n + j];
        p[0] = (v[ip * n + j] - v[im * n + j]) / (2.0 * dx0);
        p[1] = (v[i * n + jp] - v[i * n + jm]) / (2.0 * dx1);
        const double d00 = (v[ip * n + j] - 2.0 * c + v[im * n + j]) / (dx0 * dx0);
        const double d11 = (v[i * n + jp] - 2.0 * c + v[i * n + jm]) / (dx1 * dx1);
        const double d01 = (v[ip * n + jp] - v[ip * n + jm] - v[im * n + jp] +
                            v[im * n + jm]) /
                           (4.0 * dx0 * dx1);
        x << coord(0, i), coord(1, j);
        Eigen::Matrix2d a = a_const;
        if (!problem.constant_diffusion) {
          const Eigen::MatrixXd sg = problem.sigma(t_next, x);
          a = sg * sg.transpose();
        }
        const double diff = a(0, 0) * d00 + a(1, 1) * d11 + 2.0 * a(0, 1) * d01;
        next[i * n + j] = c + plan.dt * (problem.hamiltonian(t_next, x, p) + 0.5 * diff);
      }
    });
    v.swap(next);
    const double vmax = v.cwiseAbs().maxCoeff();
    if (!(vmax <= config.blowup_factor * scale)) {
      std::ostringstream msg;
      msg << "fdm: instability at t = " << T * s / plan.steps << " (max |v| = " << vmax
          << ", terminal scale " << scale << ", dt = " << plan.dt << ")";
      fail(ErrorCategory::kNumerical, msg.str());
    }
    if (s % plan.steps_per_slice == 0) {
      times.push_back(T * static_cast<double>(s) / static_cast<double>(plan.steps));
      slices.push_back(v);
    }
  }
  std::reverse(times.begin(), times.end());
  std::reverse(slices.begin(), slices.end());
  grid.times = std::move(times);
  grid.slices = std::move(slices);
  return grid;
}

RestrictResult restrict_to_target(const TimeGrid& grid, const Box& target) {
  grid.validate();
  target.validate();
  const int d = grid.dim();
  if (target.dim() != d) fail(ErrorCategory::kInvalidArgument, "restrict: dimension mismatch");
  std::vector<int> lo(d), hi(d);
  RestrictResult out;
  out.grid.extent = grid.extent;
  out.grid.points.resize(d);
  std::ostringstream report;
  for (int k = 0; k < d; ++k) {
    const double h = grid.spacing(k);
    if (target.lower[k] < grid.extent.lower[k] - 1e-9 * h ||
        target.upper[k] > grid.extent.upper[k] + 1e-9 * h) {
      fail(ErrorCategory::kInvalidArgument, "restrict: target outside the grid extent");
    }
    lo[k] = static_cast<int>(std::lround((target.lower[k] - grid.extent.lower[k]) / h));
    hi[k] = static_cast<int>(std::lround((target.upper[k] - grid.extent.lower[k]) / h));
    lo[k] = std::clamp(lo[k], 0, grid.points[k] - 1);
    hi[k] = std::clamp(hi[k], 0, grid.points[k] - 1);
    if (hi[k] <= lo[k]) fail(ErrorCategory::kInvalidArgument, "restrict: target thinner than one cell");
    const double snapped_lo =
        lo[k] == 0 ? grid.extent.lower[k] : grid.extent.lower[k] + lo[k] * h;
    const double snapped_hi = hi[k] == grid.points[k] - 1 ? grid.extent.upper[k]
                                                          : grid.extent.lower[k] + hi[k] * h;
    if (std::abs(snapped_lo - target.lower[k]) > 1e-9 * h ||
        std::abs(snapped_hi - target.upper[k]) > 1e-9 * h) {
      out.snapped = true;
      report << "axis " << k << ": [" << target.lower[k] << ", " << target.upper[k]
             << "] snapped to [" << snapped_lo << ", " << snapped_hi << "]; ";
    }
    out.grid.extent.lower[k] = snapped_lo;
    out.grid.extent.upper[k] = snapped_hi;
    out.grid.points[k] = hi[k] - lo[k] + 1;
  }
  out.report = report.str();
  out.grid.dt = grid.dt;
  out.grid.steps = grid.steps;
  out.grid.times = grid.times;
  const Eigen::Index m = out.grid.num_nodes();
  for (const Eigen::VectorXd& slice : grid.slices) {
    Eigen::VectorXd sub(m);
    for (Eigen::Index f = 0; f < m; ++f) {
      std::vector<int> idx = out.grid.unflatten(f);
      for (int k = 0; k < d; ++k) idx[k] += lo[k];
      sub[f] = slice[grid.flat_index(idx)];
    }
    out.grid.slices.push_back(std::move(sub));
  }
  return out;
}

double interpolate(const TimeGrid& grid, double t, VecRef x, TimeInterpolation mode) {
  const int d = grid.dim();
  if (x.size() != d) fail(ErrorCategory::kInvalidArgument, "interpolate: dimension mismatch");
  std::vector<int> base(d);
  std::vector<double> w(d);
  for (int k = 0; k < d; ++k) {
    const double h = grid.spacing(k);
    double s = (x[k] - grid.extent.lower[k]) / h;
    const double r = std::round(s);
    if (std::abs(s - r) < 1e-9) s = r;
    if (s < -1e-9 || s > grid.points[k] - 1 + 1e-9 || !std::isfinite(s)) {
      std::ostringstream msg;
      msg << "interpolate: x[" << k << "] = " << x[k] << " outside ["
          << grid.extent.lower[k] << ", " << grid.extent.upper[k] << "]";
      fail(ErrorCategory::kInvalidArgument, msg.str());
    }
    s = std::clamp(s, 0.0, static_cast<double>(grid.points[k] - 1));
    base[k] = std::min(static_cast<int>(s), grid.points[k] - 2);
    w[k] = s - base[k];
  }
  const double t0 = grid.times.front(), t1 = grid.times.back();
  const double tol = 1e-12 * std::max(1.0, std::abs(t1));
  if (!(t >= t0 - tol && t <= t1 + tol)) {
    fail(ErrorCategory::kInvalidArgument, "interpolate: time outside the stored range");
  }
  auto spatial = [&](const Eigen::VectorXd& slice) {
    double acc = 0.0;
    std::vector<int> idx(d);
    for (int corner = 0; corner < (1 << d); ++corner) {
      double weight = 1.0;
      for (int k = 0; k < d; ++k) {
        const bool up = (corner >> k) & 1;
        idx[k] = base[k] + (up ? 1 : 0);
        weight *= up ? w[k] : 1.0 - w[k];
      }
      if (weight != 0.0) acc += weight * slice[grid.flat_index(idx)];
    }
    return acc;
  };
  const auto it = std::upper_bound(grid.times.begin(), grid.times.end(), t);
  std::size_t k1 = static_cast<std::size_t>(it - grid.times.begin());
  if (k1 == 0) return spatial(grid.slices.front());
  if (k1 >= grid.times.size()) return spatial(grid.slices.back());
  const std::size_t k0 = k1 - 1;
  const double lambda = (t - grid.times[k0]) / (grid.times[k1] - grid.times[k0]);
  if (mode == TimeInterpolation::kNearest) {
    return spatial(grid.slices[lambda < 0.5 ? k0 : k1]);
  }
  if (lambda == 0.0) return spatial(grid.slices[k0]);
  return (1.0 - lambda) * spatial(grid.slices[k0]) + lambda * spatial(grid.slices[k1]);
}

void write_grid_csv(const TimeGrid& grid, std::ostream& out) {
  grid.validate();
  out << "# hjipi-grid v1\n";
  out << "# dim " << grid.dim() << "\n";
  for (int k = 0; k < grid.dim(); ++k) {
    out << "# axis " << k << ' ' << detail::format_double(grid.extent.lower[k]) << ' '
        << detail::format_double(grid.extent.upper[k]) << ' ' << grid.points[k] << ' '
        << detail::format_double(grid.spacing(k)) << "\n";
  }
  out << "# dt " << detail::format_double(grid.dt) << "\n";
  out << "# steps " << grid.steps << "\n";
  out << "# slices " << grid.slices.size() << "\n";
  const int row = grid.points.back();
  for (std::size_t s = 0; s < grid.slices.size(); ++s) {
    out << "# t " << detail::format_double(grid.times[s]) << "\n";
    const Eigen::VectorXd& v = grid.slices[s];
    for (Eigen::Index f = 0; f < v.size(); ++f) {
      out << detail::format_double(v[f]) << ((f + 1) % row == 0 ? '\n' : ',');
    }
  }
  if (!out) fail(ErrorCategory::kIo, "grid: write failed");
}

TimeGrid read_grid_csv(std::istream& in) {
  std::string line;
  auto header = [&](const char* key) {
    if (!std::getline(in, line)) fail(ErrorCategory::kIo, std::string("grid: missing ") + key);
    std::istringstream ss(line);
    std::string hash, k;
    ss >> hash >> k;
    if (hash != "#" || k != key) fail(ErrorCategory::kIo, std::string("grid: expected '") + key + "'");
    std::string rest;
    std::getline(ss, rest);
    return std::istringstream(rest);
  };
  {
    if (!std::getline(in, line) || line.rfind("# hjipi-grid v1", 0) != 0) {
      fail(ErrorCategory::kIo, "grid: not a grid CSV file");
    }
  }
  TimeGrid grid;
  int d = 0;
  header("dim") >> d;
  if (d < 1 || d > 16) fail(ErrorCategory::kIo, "grid: bad dimension");
  grid.extent.lower.resize(d);
  grid.extent.upper.resize(d);
  grid.points.resize(d);
  for (int k = 0; k < d; ++k) {
    auto ss = header("axis");
    int axis = -1;
    std::string lo, hi;
    ss >> axis >> lo >> hi >> grid.points[k];
    if (axis != k) fail(ErrorCategory::kIo, "grid: axes out of order");
    grid.extent.lower[k] = detail::parse_double(lo);
    grid.extent.upper[k] = detail::parse_double(hi);
  }
  {
    std::string s;
    header("dt") >> s;
    grid.dt = detail::parse_double(s);
  }
  header("steps") >> grid.steps;
  std::size_t count = 0;
  header("slices") >> count;
  const Eigen::Index m = grid.num_nodes();
  for (std::size_t s = 0; s < count; ++s) {
    std::string ts;
    header("t") >> ts;
    grid.times.push_back(detail::parse_double(ts));
    Eigen::VectorXd v(m);
    Eigen::Index f = 0;
    while (f < m) {
      if (!std::getline(in, line)) fail(ErrorCategory::kIo, "grid: truncated slice");
      std::string_view rest(line);
      while (!rest.empty()) {
        const std::size_t comma = rest.find(',');
        if (f >= m) fail(ErrorCategory::kIo, "grid: slice too long");
        v[f++] = detail::parse_double(rest.substr(0, comma));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
    }
    grid.slices.push_back(std::move(v));
  }
  grid.validate();
  return grid;
}

void write_grid_binary(const TimeGrid& grid, std::ostream& out) {
  grid.validate();
  out.write(kBinaryMagic, 4);
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.dim()));
  for (int k = 0; k < grid.dim(); ++k) {
    put<double>(out, grid.extent.lower[k]);
    put<double>(out, grid.extent.upper[k]);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(grid.points[k]));
  }
  put<double>(out, grid.dt);
  put<std::int64_t>(out, grid.steps);
  put<std::uint64_t>(out, grid.slices.size());
  for (std::size_t s = 0; s < grid.slices.size(); ++s) {
    put<double>(out, grid.times[s]);
    out.write(reinterpret_cast<const char*>(grid.slices[s].data()),
              static_cast<std::streamsize>(grid.slices[s].size() * sizeof(double)));
  }
  if (!out) fail(ErrorCategory::kIo, "grid: write failed");
}

TimeGrid read_grid_binary(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kBinaryMagic, 4) != 0) {
    fail(ErrorCategory::kIo, "grid: not a grid binary file");
  }
  if (get<std::uint32_t>(in) != kFormatVersion) fail(ErrorCategory::kIo, "grid: unsupported version");
  const auto d = get<std::uint32_t>(in);
  if (d < 1 || d > 16) fail(ErrorCategory::kIo, "grid: bad dimension");
  TimeGrid grid;
  grid.extent.lower.resize(d);
  grid.extent.upper.resize(d);
  grid.points.resize(d);
  for (std::uint32_t k = 0; k < d; ++k) {
    grid.extent.lower[k] = get<double>(in);
    grid.extent.upper[k] = get<double>(in);
    grid.points[k] = static_cast<int>(get<std::uint32_t>(in));
    if (grid.points[k] < 2 || grid.points[k] > (1 << 20)) fail(ErrorCategory::kIo, "grid: corrupt header");
  }
  grid.dt = get<double>(in);
  grid.steps = get<std::int64_t>(in);
  const auto count = get<std::uint64_t>(in);
  const Eigen::Index m = grid.num_nodes();
  for (std::uint64_t s = 0; s < count; ++s) {
    grid.times.push_back(get<double>(in));
    Eigen::VectorXd v(m);
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(m * sizeof(double)));
    if (!in) fail(ErrorCategory::kIo, "grid: truncated binary stream");
    grid.slices.push_back(std::move(v));
  }
  grid.validate();
  return grid;
}

void save_grid(const TimeGrid& grid, const std::string& path) {
  const bool binary = path.size() > 4 && path.substr(path.size() - 4) == ".bin";
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) fail(ErrorCategory::kIo, "grid: cannot open '" + path + "'");
  if (binary) {
    write_grid_binary(grid, out);
  } else {
    write_grid_csv(grid, out);
  }
}

TimeGrid load_grid(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kMissingInput, "grid: cannot open '" + path + "'");
  char magic[4] = {};
  in.read(magic, 4);
  in.clear();
  in.seekg(0);
  if (std::memcmp(magic, kBinaryMagic, 4) == 0) return read_grid_binary(in);
  return read_grid_csv(in);
}

PairwiseReference::PairwiseReference(PubSubParams params,
                                     std::vector<std::shared_ptr<const TimeGrid>> grids)
    : params_(std::move(params)), grids_(std::move(grids)) {
  if (static_cast<int>(grids_.size()) != params_.n - 1) {
    fail(ErrorCategory::kInvalidArgument, "pairwise reference: need N - 1 grids");
  }
}

double PairwiseReference::value(double t, VecRef x) const {
  if (x.size() != params_.n) fail(ErrorCategory::kInvalidArgument, "pairwise reference: dimension mismatch");
  double v = 0.0;
  for (int i = 1; i < params_.n; ++i) {
    v += interpolate(*grids_[i - 1], t, Eigen::Vector2d(x[0], x[i]));
  }
  return v;
}

PairwiseReference reference_nd_isotropic(const PubSubParams& params, const FDMConfig& config) {
  params.validate();
  if (params.anisotropy > 0.0) {
    fail(ErrorCategory::kInvalidArgument,
         "pairwise reference: anisotropic diffusion does not decompose");
  }
  const Eigen::MatrixXd sigma = params.noise * Eigen::MatrixXd::Identity(params.n, params.n);
  // Every pair sees the same 2x2 diffusion and dynamics, so one solve serves all.
  auto grid = std::make_shared<const TimeGrid>(
      fdm_solve_2d(make_pubsub_pair_problem(params, sigma, 1), config));
  return PairwiseReference(params, std::vector<std::shared_ptr<const TimeGrid>>(params.n - 1, grid));
}

}  // namespace hjipi
