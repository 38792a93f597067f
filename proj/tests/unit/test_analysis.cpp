#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "hjipi/analysis.hpp"
#include "hjipi/path_planning.hpp"
#include "toy_saddle.hpp"

namespace hjipi {
namespace {

namespace fs = std::filesystem;
using Eigen::VectorXd;

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("hjipi_analysis_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(MetricsTest, IdenticalAndDoubledPredictions) {
  const VectorXd ref = VectorXd::LinSpaced(50, -1.0, 2.0);
  EXPECT_EQ(relative_l2_error(ref, ref), 0.0);
  EXPECT_EQ(mse(ref, ref), 0.0);
  EXPECT_NEAR(relative_l2_error(2.0 * ref, ref), 1.0, 1e-15);
  EXPECT_NEAR(mse(2.0 * ref, ref), ref.squaredNorm() / 50.0, 1e-14);
}

TEST(MetricsTest, RelativeErrorIsScaleInvariant) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n;
  VectorXd a(40), b(40);
  for (int i = 0; i < 40; ++i) {
    a[i] = n(rng);
    b[i] = n(rng);
  }
  for (double k : {-3.0, 0.25, 1e6}) {
    EXPECT_NEAR(relative_l2_error(k * a, k * b), relative_l2_error(a, b), 1e-13);
  }
}

TEST(MetricsTest, ZeroReferenceAndShapeMismatchThrow) {
  EXPECT_THROW(relative_l2_error(VectorXd::Ones(3), VectorXd::Zero(3)), Error);
  EXPECT_THROW(relative_l2_error(VectorXd::Ones(3), VectorXd::Ones(4)), Error);
  EXPECT_THROW(mse(VectorXd::Ones(3), VectorXd::Ones(2)), Error);
}

TEST(RateFitTest, GeometricSequenceRecoversRate) {
  std::vector<int> n;
  std::vector<double> e;
  for (int k = 1; k <= 12; ++k) {
    n.push_back(k);
    e.push_back(std::pow(0.5, k));
  }
  const RateFit fit = fit_log_linear(n, e);
  EXPECT_NEAR(fit.slope, std::log(0.5), 1e-6);
  EXPECT_NEAR(fit.rho(), 0.5, 1e-6);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
}

TEST(RateFitTest, ConstantSequenceHasZeroSlope) {
  const RateFit fit = fit_log_linear({1, 2, 3, 4}, {0.3, 0.3, 0.3, 0.3});
  EXPECT_NEAR(fit.slope, 0.0, 1e-15);
  EXPECT_EQ(fit.r_squared, 1.0);
}

TEST(RateFitTest, SlopeIsInvariantUnderScaling) {
  const std::vector<int> n{1, 2, 3, 4, 5};
  const std::vector<double> e{1.0, 0.4, 0.5, 0.1, 0.07};
  std::vector<double> scaled;
  for (double v : e) scaled.push_back(37.0 * v);
  EXPECT_NEAR(fit_log_linear(n, e).slope, fit_log_linear(n, scaled).slope, 1e-12);
  EXPECT_NEAR(fit_log_linear(n, e).r_squared, fit_log_linear(n, scaled).r_squared, 1e-12);
}

TEST(RateFitTest, ZeroChangesAreFlooredAndShortInputsRejected) {
  const RateFit fit = fit_log_linear({1, 2, 3}, {1e-3, 0.0, 0.0});
  EXPECT_TRUE(std::isfinite(fit.slope));
  EXPECT_LT(fit.slope, 0.0);
  EXPECT_THROW(fit_log_linear({1, 2}, {0.1, 0.05}), Error);
}

TEST(RateFitTest, HistoryWindowSelectsIterations) {
  IterationHistory h;
  for (int k = 0; k < 8; ++k) {
    IterationRecord r;
    r.iteration = k;
    r.sup_diff = k == 0 ? 100.0 : std::pow(0.3, k);
    h.records.push_back(r);
  }
  const RateFit fit = convergence_history(h, 1, 5, "pi");
  EXPECT_EQ(fit.iterations, (std::vector<int>{1, 2, 3, 4, 5}));
  EXPECT_NEAR(fit.slope, std::log(0.3), 1e-12);
  EXPECT_EQ(fit.label, "pi");
  EXPECT_EQ(convergence_history(h).iterations.size(), 7u);
}

TEST(SelectorProbeTest, ConstantSelectorGivesZero) {
  const GameProblem p = make_path_planning_problem({});
  const SelectorMap constant = [](double, VecRef, VecRef) { return VectorXd::Ones(2).eval(); };
  const SelectorProbeResult r = lipschitz_selector_probe(p, constant, 500, 3);
  EXPECT_EQ(r.kappa_hat, 0.0);
  EXPECT_EQ(r.samples, 500);
}

TEST(SelectorProbeTest, PathPlanningControlIsFiveLipschitz) {
  const GameProblem p = make_path_planning_problem({});
  const SelectorProbeResult r = lipschitz_selector_probe(
      p, make_selector_map(p, SelectorComponent::kA), 10000, 11, 0.5);
  EXPECT_LE(r.kappa_hat, 5.0 * (1.0 + 1e-2));
  EXPECT_GE(r.kappa_hat, 4.5);  // the linear branch is sampled
}

TEST(SelectorProbeTest, ToySaddleMatchesHandDerivedConstant) {
  const GameProblem p = testing::toy_saddle_problem();
  MinimaxConfig cfg;
  cfg.tolerance = 1e-10;
  cfg.max_iterations = 500;
  const SelectorProbeResult r = lipschitz_selector_probe(
      p, make_selector_map(p, SelectorComponent::kBoth, SelectorMode::kNumeric, cfg), 300, 5, 4.0,
      1e-2);
  EXPECT_NEAR(r.kappa_hat, testing::toy_saddle_kappa(), 0.05 * testing::toy_saddle_kappa());
}

TEST(SelectorProbeTest, MonotoneInNestedSampleSets) {
  const GameProblem p = make_path_planning_problem({});
  const SelectorMap sel = make_selector_map(p, SelectorComponent::kA);
  double prev = 0.0;
  for (long n : {10, 100, 1000}) {
    const double k = lipschitz_selector_probe(p, sel, n, 21, 0.5).kappa_hat;
    EXPECT_GE(k, prev);
    prev = k;
  }
}

GameProblem drift_problem(const Eigen::Vector2d& v, double noise) {
  GameProblem p = testing::toy_saddle_problem();
  p.drift = [v](double, VecRef, VecRef, VecRef) { return VectorXd(v); };
  p.sigma = [noise](double, VecRef) { return (noise * Eigen::MatrixXd::Identity(2, 2)).eval(); };
  return p;
}

FeedbackPolicy zero_policy() {
  return [](double, VecRef) { return ControlPair{VectorXd::Zero(2), VectorXd::Zero(2)}; };
}

TEST(EulerMaruyamaTest, DeterministicDriftGivesStraightLine) {
  const Eigen::Vector2d v(0.3, -1.2);
  const Trajectory tr = euler_maruyama(drift_problem(v, 0.0), zero_policy(), Eigen::Vector2d(1, 2),
                                       0.01, 100, 7);
  for (int k = 0; k <= 100; ++k) {
    EXPECT_NEAR(tr.x(0, k), 1.0 + 0.3 * 0.01 * k, 1e-12);
    EXPECT_NEAR(tr.x(1, k), 2.0 - 1.2 * 0.01 * k, 1e-12);
    EXPECT_NEAR(tr.t[k], 0.01 * k, 1e-15);
  }
  const Trajectory other = euler_maruyama(drift_problem(v, 0.0), zero_policy(),
                                          Eigen::Vector2d(1, 2), 0.01, 100, 8);
  EXPECT_EQ(tr.x, other.x);
}

TEST(EulerMaruyamaTest, ZeroDriftWithoutNoiseStaysPut) {
  const Trajectory tr = euler_maruyama(drift_problem(Eigen::Vector2d::Zero(), 0.0), zero_policy(),
                                       Eigen::Vector2d(0.5, -0.5), 0.1, 20, 1);
  for (int k = 0; k <= 20; ++k) EXPECT_EQ(tr.x.col(k), Eigen::Vector2d(0.5, -0.5));
}

TEST(EulerMaruyamaTest, BrownianMeanSquaredDisplacement) {
  const GameProblem p = drift_problem(Eigen::Vector2d::Zero(), 0.1);
  const long paths = 10000, steps = 50;
  const double dt = 0.02;
  const auto trs = euler_maruyama_paths(p, zero_policy(), Eigen::Vector2d::Zero(), dt, steps, paths, 99);
  VectorXd sq(paths);
  for (long k = 0; k < paths; ++k) sq[k] = trs[k].x.col(steps).squaredNorm();
  const double mean = sq.mean();
  const double se = std::sqrt((sq.array() - mean).square().sum() / (paths - 1) / paths);
  const double expected = 2 * 0.01 * steps * dt;
  EXPECT_LT(std::abs(mean - expected), 3.0 * se);
}

TEST(EulerMaruyamaTest, ReproducibleAndIndependentOfWorkers) {
  const GameProblem p = drift_problem(Eigen::Vector2d(0.1, 0.0), 0.2);
  const auto one = euler_maruyama_paths(p, zero_policy(), Eigen::Vector2d::Zero(), 0.01, 30, 9, 4, 1);
  const auto two = euler_maruyama_paths(p, zero_policy(), Eigen::Vector2d::Zero(), 0.01, 30, 9, 4, 3);
  for (int k = 0; k < 9; ++k) EXPECT_EQ(one[k].x, two[k].x);
  EXPECT_NE(one[0].x, one[1].x);
}

TEST(EulerMaruyamaTest, NetworkFeedbackUsesSelectorAndZeroDisturbance) {
  const GameProblem p = make_path_planning_problem({});
  auto state = std::make_shared<const NetworkState>(
      xavier_init(NetworkArch::for_state_dim(2, {8, 8}), 4));
  const FeedbackPolicy adv = network_feedback(state, ValueForm::kAnsatz, p, SelectorMode::kClosedForm);
  const FeedbackPolicy calm = network_feedback(state, ValueForm::kAnsatz, p, SelectorMode::kClosedForm,
                                               {}, Disturbance::kZero);
  const Eigen::Vector2d x(0.2, -0.3);
  const ControlPair a = adv(0.4, x), c = calm(0.4, x);
  EXPECT_EQ(a.a, c.a);
  EXPECT_EQ(c.b, VectorXd::Zero(2));
  EXPECT_GT(a.b.norm(), 0.0);
  EXPECT_LE(a.b.norm(), 0.1 + 1e-12);
}

FDMConfig small_pair_config() {
  FDMConfig c = FDMConfig::pubsub_defaults();
  c.points = 61;
  c.saved_slices = 21;
  return c;
}

PubSubParams short_params(int n) {
  PubSubParams p;
  p.n = n;
  p.horizon = 0.1;
  return p;
}

TEST(DecompositionTest, TwoDimensionsReducesToPairResidual) {
  const PubSubParams params = short_params(2);
  const PairwiseReference ref = reference_nd_isotropic(params, small_pair_config());
  const DecompositionStats s = decomposition_residual_check(ref, make_pubsub_problem(params), 200, 3);
  EXPECT_NEAR(s.ratio, 1.0, 1e-9);
  EXPECT_GT(s.truncation, 0.0);
  EXPECT_GE(s.max_abs, s.mean_abs);
}

TEST(DecompositionTest, ThreeDimensionsStayNearTruncationScale) {
  const PubSubParams params = short_params(3);
  const PairwiseReference ref = reference_nd_isotropic(params, small_pair_config());
  const DecompositionStats s = decomposition_residual_check(ref, make_pubsub_problem(params), 300, 4);
  EXPECT_LE(s.ratio, 5.0);
}

TEST(DecompositionTest, AnisotropicInputRejected) {
  PubSubParams params = short_params(2);
  const PairwiseReference ref = reference_nd_isotropic(params, small_pair_config());
  const GameProblem wrong_dim = make_pubsub_problem(short_params(3));
  EXPECT_THROW(decomposition_residual_check(ref, wrong_dim, 10, 1), Error);
  params.anisotropy = 0.3;
  const PairwiseReference aniso(params, {std::make_shared<const TimeGrid>(ref.pair_grid(1))});
  EXPECT_THROW(decomposition_residual_check(aniso, make_pubsub_problem(short_params(2)), 10, 1), Error);
}

TEST(CompareTest, ExactReferenceGivesZeroError) {
  const GameProblem p = make_path_planning_problem({});
  const NetworkState zero(NetworkArch::for_state_dim(2, {8}));
  TimeGrid g;
  g.extent = p.target_domain;
  g.points = {11, 11};
  g.dt = 0.5;
  g.steps = 2;
  g.times = {0.0, 0.5, 1.0};
  for (int s = 0; s < 3; ++s) {
    VectorXd v(g.num_nodes());
    for (Eigen::Index f = 0; f < v.size(); ++f) v[f] = p.terminal.value(g.node(f));
    g.slices.push_back(v);
  }
  const ErrorReport r = compare_to_grid(zero, ValueForm::kAnsatz, p, g, {0.5, 0.0}, "PI");
  ASSERT_EQ(r.slices.size(), 2u);
  EXPECT_EQ(r.slices[0].t, 0.0);
  EXPECT_EQ(r.slices[1].t, 0.5);
  EXPECT_NEAR(r.slices[0].rel_l2, 0.0, 1e-15);
  EXPECT_EQ(r.problem, p.label);
  EXPECT_THROW(compare_to_grid(zero, ValueForm::kAnsatz, p, g, {0.25}, "PI"), Error);

  const ErrorReport f = compare_to_function(
      zero, ValueForm::kAnsatz, p, [&](double, VecRef x) { return p.terminal.value(x); }, {0.3}, 64, 1,
      "PI");
  EXPECT_NEAR(f.slices[0].rel_l2, 0.0, 1e-15);
}

TEST(ReportTest, EmptyInputWritesHeaders) {
  const fs::path dir = scratch_dir("empty");
  emit_report({}, {}, {}, dir.string());
  EXPECT_EQ(read_file(dir / "errors.csv"), "problem,method,t,rel_l2,mse\n");
  EXPECT_EQ(read_file(dir / "rates.csv"), "iteration,E_n\n");
  EXPECT_EQ(read_file(dir / "probes.csv"), "problem,kappa_hat,n_samples\n");
  EXPECT_EQ(read_file(dir / "table.csv"), "problem,method,metric\n");
  EXPECT_TRUE(fs::exists(dir / "summary.txt"));
  fs::remove_all(dir);
}

TEST(ReportTest, OneRowPerSliceInDeclaredColumnOrder) {
  ErrorReport r;
  r.problem = "pubsub";
  r.method = "PI";
  r.slices = {{0.0, 6.367e-03, 6.007e-06}, {0.25, 1e-3, 2e-7}};
  const fs::path dir = scratch_dir("one");
  emit_report({r}, {fit_log_linear({1, 2, 3}, {1.0, 0.5, 0.25}, "pi")},
              {{"path_planning", 4.99, 10000}}, dir.string());
  const auto err = lines(read_file(dir / "errors.csv"));
  ASSERT_EQ(err.size(), 3u);
  EXPECT_EQ(err[1], "pubsub,PI,0,0.006367,6.007e-06");
  const auto table = lines(read_file(dir / "table.csv"));
  ASSERT_EQ(table.size(), 3u);
  EXPECT_EQ(table[0], "problem,method,metric,t=0,t=0.25");
  EXPECT_EQ(table[1], "pubsub,PI,rel_l2,0.006367,0.001");
  EXPECT_EQ(lines(read_file(dir / "rates.csv"))[2], "2,0.5");
  EXPECT_EQ(lines(read_file(dir / "probes.csv"))[1], "path_planning,4.99,10000");
  fs::remove_all(dir);
}

TEST(ReportTest, TrajectoriesCsvColumns) {
  Trajectory t;
  t.t = Eigen::Vector2d(0.0, 0.1);
  t.x = Eigen::Matrix2d::Identity();
  const fs::path dir = scratch_dir("traj");
  fs::create_directories(dir);
  write_trajectories_csv({t}, (dir / "t.csv").string());
  const auto l = lines(read_file(dir / "t.csv"));
  ASSERT_EQ(l.size(), 3u);
  EXPECT_EQ(l[0], "path_id,step,t,x0,x1");
  EXPECT_EQ(l[2], "0,1,0.1,0,1");
  fs::remove_all(dir);
}

TEST(ReportTest, UnwritableDirectoryThrows) {
  try {
    emit_report({}, {}, {}, "/proc/hjipi_no_such_dir");
    FAIL() << "expected an I/O error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kIo);
  }
}

}  // namespace
}  // namespace hjipi
