#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "hjipi/path_planning.hpp"
#include "hjipi/pinn.hpp"
#include "hjipi/pubsub.hpp"
#include "toy_saddle.hpp"

namespace hjipi {
namespace {

namespace fs = std::filesystem;
using Eigen::MatrixXd;
using Eigen::VectorXd;

PITrainConfig tiny_config() {
  PITrainConfig c;
  c.epochs = 20;
  c.updates = 3;
  c.resample_interval = 10;
  c.collocation = 64;
  c.validation = 128;
  c.residual_samples = 64;
  c.hidden = {8, 8};
  c.tol = 0.0;
  c.seed = 5;
  return c;
}

NetworkState random_state(int d, std::uint64_t seed) {
  NetworkState s = xavier_init(NetworkArch::for_state_dim(d, {6, 6}), seed);
  for (Eigen::Index i = 0; i < s.params().size(); ++i) s.params()[i] += 0.05 * std::sin(1.0 + i);
  return s;
}

TEST(CollocationTest, PointsStayInDomainAndAreDeterministic) {
  const Box box = Box::cube(3, -1.5, 0.5);
  const CollocationBatch a = sample_collocation(box, 0.5, 20000, 4, 100);
  const CollocationBatch b = sample_collocation(box, 0.5, 20000, 4, 100);
  EXPECT_EQ(a.t, b.t);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.terminal_x, b.terminal_x);
  EXPECT_NE(a.x, sample_collocation(box, 0.5, 20000, 5).x);
  EXPECT_GE(a.t.minCoeff(), 0.0);
  EXPECT_LT(a.t.maxCoeff(), 0.5);
  EXPECT_GE(a.x.minCoeff(), -1.5);
  EXPECT_LE(a.x.maxCoeff(), 0.5);
  EXPECT_EQ(a.terminal_x.cols(), 100);
  // Uniform marginals: mean within 4 standard errors of the center.
  const double se_x = 2.0 / std::sqrt(12.0 * 20000.0);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a.x.row(i).mean(), -0.5, 4.0 * se_x);
  EXPECT_NEAR(a.t.mean(), 0.25, 4.0 * 0.5 / std::sqrt(12.0 * 20000.0));
  EXPECT_THROW(sample_collocation(box, 0.5, 0, 1), Error);
  EXPECT_THROW(sample_collocation(box, 0.0, 10, 1), Error);
}

TEST(PolicyTest, UniformInitialPolicyIsAdmissibleAndPointwise) {
  const GameProblem p = make_path_planning_problem({});
  const CollocationBatch col = sample_collocation(p.training_domain, p.horizon, 200, 1);
  const PolicySnapshot snap = PolicySnapshot::uniform(9);
  const PolicyTable t1 = evaluate_policy(snap, p, col.t, col.x);
  const PolicyTable t2 = evaluate_policy(snap, p, col.t, col.x);
  EXPECT_EQ(t1.a, t2.a);
  for (Eigen::Index j = 0; j < 200; ++j) {
    EXPECT_TRUE(p.controls_a.contains(t1.a.col(j)));
    EXPECT_TRUE(p.controls_b.contains(t1.b.col(j)));
  }
  EXPECT_GT((t1.a.col(0) - t1.a.col(1)).norm(), 0.0);
  // The draw at a point does not depend on the rest of the batch.
  const PolicyTable single = evaluate_policy(snap, p, col.t.segment(7, 1), col.x.col(7));
  EXPECT_EQ(single.a.col(0), t1.a.col(7));
  EXPECT_NE(evaluate_policy(PolicySnapshot::uniform(10), p, col.t, col.x).a, t1.a);
}

TEST(PolicyTest, ClosedFormAndNumericSelectorsAgree) {
  const GameProblem p = make_path_planning_problem({});
  const NetworkState s = random_state(2, 3);
  const CollocationBatch col = sample_collocation(p.training_domain, p.horizon, 100, 2);
  const PolicyTable closed = evaluate_policy(
      PolicySnapshot::frozen(s, ValueForm::kAnsatz, SelectorMode::kClosedForm), p, col.t, col.x);
  const PolicyTable numeric = evaluate_policy(
      PolicySnapshot::frozen(s, ValueForm::kAnsatz, SelectorMode::kNumeric), p, col.t, col.x);
  EXPECT_LE((closed.a - numeric.a).cwiseAbs().maxCoeff(), 1e-3);
  EXPECT_LE((closed.b - numeric.b).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(PolicyTest, NumericModeUsedWhenNoClosedFormExists) {
  const GameProblem p = testing::toy_saddle_problem();
  const ControlPair c =
      select_controls(p, SelectorMode::kClosedForm, {}, 0.0, Eigen::Vector2d::Zero(), Eigen::Vector2d(1.0, -2.0));
  EXPECT_LE((c.a - Eigen::Vector2d(-1.0, 2.0)).norm(), 1e-4);
  EXPECT_LE((c.b - Eigen::Vector2d(0.5, -1.0)).norm(), 1e-4);
}

// dv/dt + c + grad v . f + 1/2 Tr(a D^2 v) from central differences of the
// scalar ansatz value.
double fd_residual(const NetworkState& s, const GameProblem& p, double t, const VectorXd& x,
                   const ControlPair& c) {
  auto v = [&](double tt, const VectorXd& y) { return value_of(s, tt, y, p.terminal, p.horizon, ValueForm::kAnsatz); };
  const double h = 1e-4;
  const int d = p.dim;
  const double v0 = v(t, x);
  double r = (v(t + h, x) - v(t - h, x)) / (2 * h);
  VectorXd grad(d);
  MatrixXd hess(d, d);
  for (int i = 0; i < d; ++i) {
    VectorXd e = VectorXd::Zero(d);
    e[i] = h;
    grad[i] = (v(t, x + e) - v(t, x - e)) / (2 * h);
    for (int j = 0; j < d; ++j) {
      VectorXd f = VectorXd::Zero(d);
      f[j] = h;
      hess(i, j) = (v(t, x + e + f) - v(t, x + e - f) - v(t, x - e + f) + v(t, x - e - f)) / (4 * h * h);
    }
  }
  (void)v0;
  const MatrixXd sg = p.sigma(t, x);
  r += p.running_cost(t, x, c.a, c.b) + grad.dot(p.drift(t, x, c.a, c.b)) +
       0.5 * ((sg * sg.transpose()).array() * hess.array()).sum();
  return r;
}

TEST(ResidualTest, MatchesFiniteDifferenceOracle) {
  const GameProblem p = make_path_planning_problem({});
  const NetworkState s = random_state(2, 7);
  const NetworkState prev = random_state(2, 8);
  const PolicySnapshot snap = PolicySnapshot::frozen(prev, ValueForm::kAnsatz, SelectorMode::kClosedForm);
  const CollocationBatch col = sample_collocation(p.training_domain, p.horizon, 20, 3);
  for (Eigen::Index j = 0; j < 20; ++j) {
    const double t = std::min(col.t[j], 0.99);
    const VectorXd x = col.x.col(j);
    const ControlPair c = policy_improvement(snap, t, x, p);
    const double r = residual(s, t, x, snap, p);
    EXPECT_NEAR(r, fd_residual(s, p, t, x, c), 1e-5 * std::max(1.0, std::abs(r)));
  }
}

TEST(ResidualTest, HjiResidualEqualsFrozenResidualAtOptimalControls) {
  PubSubParams params;
  params.n = 3;
  const GameProblem p = make_pubsub_problem(params);
  const NetworkState s = random_state(3, 2);
  const CollocationBatch col = sample_collocation(p.training_domain, p.horizon, 30, 8);
  const JetBatch batch = make_jet_batch(p, col.t, col.x, ValueForm::kAnsatz);
  const std::vector<ValueJet> jets = evaluate_jets(s, batch);
  for (Eigen::Index j = 0; j < 30; ++j) {
    const ResidualTerm h = hji_residual(p, col.t[j], col.x.col(j), jets[j], SelectorMode::kClosedForm, {});
    const ControlPair c = p.selector(col.t[j], col.x.col(j), jets[j].grad_x);
    const ResidualTerm f = frozen_residual(jets[j], p.running_cost(col.t[j], col.x.col(j), c.a, c.b),
                                           p.drift(col.t[j], col.x.col(j), c.a, c.b));
    EXPECT_NEAR(h.r, f.r, 1e-12 * std::max(1.0, std::abs(f.r)));
    EXPECT_LE((h.d_grad - f.d_grad).norm(), 1e-14);
  }
}

TEST(ResidualNormTest, ConstantResidualGivesExactNorm) {
  const ResidualNorm r = residual_norm_from_samples(VectorXd::Constant(100, -3.0), 2.0);
  EXPECT_NEAR(r.value, 3.0 * std::sqrt(2.0), 1e-14);
  EXPECT_EQ(r.standard_error, 0.0);
  EXPECT_EQ(residual_norm_from_samples(VectorXd(), 1.0).value, 0.0);
  const ResidualNorm noisy = residual_norm_from_samples(VectorXd::LinSpaced(1000, -1.0, 1.0), 1.0);
  EXPECT_NEAR(noisy.value, std::sqrt(1.0 / 3.0), 1e-2);
  EXPECT_GT(noisy.standard_error, 0.0);
}

TEST(SupNormTest, EstimateIsALowerBoundThatTightens) {
  const GameProblem p = make_path_planning_problem({});
  const NetworkState a = random_state(2, 1);
  NetworkState b = a;
  const int last = b.arch().num_layers() - 1;
  b.bias(last)[0] += 0.1;  // v_b - v_a = 0.1 (T - t)
  const ValidationSet small = make_validation_set(p, 16, 3);
  const ValidationSet large = make_validation_set(p, 4096, 3);
  const double exact = 0.1 * p.horizon;
  const double es = estimate_sup_norm_diff(a, b, small, p);
  const double el = estimate_sup_norm_diff(a, b, large, p);
  EXPECT_LE(es, exact + 1e-15);
  EXPECT_LE(el, exact + 1e-15);
  EXPECT_GE(el, 0.999 * exact);
  EXPECT_EQ(estimate_sup_norm_diff(a, a, large, p), 0.0);
}

TEST(TrainingTest, ZeroEpochsLeaveStateUnchanged) {
  const GameProblem p = make_path_planning_problem({});
  PITrainConfig c = tiny_config();
  c.epochs = 0;
  NetworkState s = random_state(2, 4);
  const VectorXd before = s.params();
  AdamState adam(c.adam, s.params().size());
  const std::vector<double> loss = train_policy_evaluation(s, adam, PolicySnapshot::uniform(1), c, p);
  EXPECT_TRUE(loss.empty());
  EXPECT_EQ(s.params(), before);
  EXPECT_EQ(adam.step, 0);
}

TEST(TrainingTest, LossDecreases) {
  const GameProblem p = make_pubsub_problem({});
  PITrainConfig c = tiny_config();
  c.epochs = 300;
  c.resample_interval = 300;
  c.adam.learning_rate = 5e-3;
  NetworkState s = xavier_init(NetworkArch::for_state_dim(2, c.hidden), 1);
  AdamState adam(c.adam, s.params().size());
  const std::vector<double> loss = train_policy_evaluation(s, adam, PolicySnapshot::uniform(1), c, p);
  ASSERT_EQ(loss.size(), 300u);
  EXPECT_LT(loss.back(), 0.5 * loss.front());
  EXPECT_EQ(adam.step, 300);
}

TEST(PolicyIterationTest, SingleUpdateGivesOneRecord) {
  PITrainConfig c = tiny_config();
  c.updates = 1;
  const PIResult r = run_policy_iteration(make_path_planning_problem({}), c);
  ASSERT_EQ(r.history.size(), 1u);
  EXPECT_EQ(r.history.records[0].loss.size(), 20u);
  EXPECT_FALSE(r.history.converged);
}

TEST(PolicyIterationTest, InfiniteToleranceStopsAfterSecondIteration) {
  PITrainConfig c = tiny_config();
  c.updates = 6;
  c.tol = std::numeric_limits<double>::infinity();
  const PIResult r = run_policy_iteration(make_path_planning_problem({}), c);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_TRUE(r.history.converged);
}

TEST(PolicyIterationTest, WarmStartCarriesParametersAcrossIterations) {
  PITrainConfig c = tiny_config();
  std::vector<VectorXd> before, after;
  PIObserver obs;
  obs.before_evaluation = [&](int, const NetworkState& s) { before.push_back(s.params()); };
  obs.after_iteration = [&](const IterationRecord&, const NetworkState& s) { after.push_back(s.params()); };
  const PIResult r = run_policy_iteration(make_path_planning_problem({}), c, obs);
  ASSERT_EQ(before.size(), 3u);
  EXPECT_EQ(before[0], xavier_init(NetworkArch::for_state_dim(2, c.hidden),
                                   stream_seed(c.seed, SeedStream::kInit)).params());
  for (std::size_t n = 1; n < before.size(); ++n) EXPECT_EQ(before[n], after[n - 1]);
  EXPECT_EQ(after.back(), r.state.params());
  for (std::size_t n = 0; n < after.size(); ++n) EXPECT_NE(before[n], after[n]);
}

TEST(PolicyIterationTest, ReplayIsBitIdenticalAndWorkerIndependent) {
  PITrainConfig c = tiny_config();
  c.engine.chunk_size = 16;
  const GameProblem p = make_path_planning_problem({});
  const PIResult a = run_policy_iteration(p, c);
  const PIResult b = run_policy_iteration(p, c);
  c.engine.workers = 3;
  const PIResult w = run_policy_iteration(p, c);
  EXPECT_EQ(a.state.params(), b.state.params());
  EXPECT_EQ(a.history.sup_diffs(), b.history.sup_diffs());
  EXPECT_EQ(a.state.params(), w.state.params());
  for (std::size_t n = 0; n < a.history.size(); ++n) {
    EXPECT_EQ(a.history.records[n].loss, w.history.records[n].loss);
    EXPECT_EQ(a.history.records[n].residual_norm, b.history.records[n].residual_norm);
  }
  c.seed = 6;
  EXPECT_NE(run_policy_iteration(p, c).state.params(), a.state.params());
}

TEST(PolicyIterationTest, HistoryCsvAndCheckpoints) {
  const fs::path dir = fs::temp_directory_path() / "hjipi_pinn_history";
  fs::remove_all(dir);
  PITrainConfig c = tiny_config();
  c.updates = 2;
  c.epochs = 3;
  c.checkpoint_dir = (dir / "ckpt").string();
  const PIResult r = run_policy_iteration(make_path_planning_problem({}), c);
  fs::create_directories(dir);
  write_history_csv(r.history, (dir / "history.csv").string());
  std::ifstream in(dir / "history.csv");
  std::vector<std::string> rows;
  for (std::string l; std::getline(in, l);) rows.push_back(l);
  ASSERT_EQ(rows.size(), 7u);
  EXPECT_EQ(rows[0], "iteration,epoch,loss,p_n,sup_diff");
  EXPECT_EQ(rows[1].substr(0, 4), "0,0,");
  EXPECT_EQ(rows[1].substr(rows[1].size() - 2), ",,");
  EXPECT_NE(rows[3].substr(rows[3].size() - 2), ",,");
  EXPECT_TRUE(fs::exists(dir / "ckpt" / "iter_0000.txt"));
  EXPECT_TRUE(fs::exists(dir / "ckpt" / "iter_0001.json"));
  EXPECT_EQ(load_network((dir / "ckpt" / "iter_0001.txt").string()).params(), r.state.params());
  fs::remove_all(dir);
}

TEST(DirectTest, RunsForTotalBudgetAndNeedsClosedForm) {
  PITrainConfig c = tiny_config();
  c.epochs = 10;
  c.updates = 3;
  const DirectResult r = direct_pinn_train(make_path_planning_problem({}), c);
  EXPECT_EQ(r.loss.size(), 30u);
  EXPECT_TRUE(r.state.all_finite());
  EXPECT_EQ(direct_pinn_train(make_path_planning_problem({}), c).state.params(), r.state.params());
  EXPECT_THROW(direct_pinn_train(testing::toy_saddle_problem(), c), Error);
}

TEST(ConfigTest, DefaultsAndValidation) {
  const PITrainConfig pp = PITrainConfig::path_planning_defaults();
  EXPECT_EQ(pp.epochs, 1000);
  EXPECT_EQ(pp.updates, 1000);
  EXPECT_EQ(pp.collocation, 2000);
  EXPECT_EQ(pp.hidden, (std::vector<int>{64, 64, 64, 64}));
  const PITrainConfig ps = PITrainConfig::pubsub_defaults(5);
  EXPECT_EQ(ps.epochs, 5000);
  EXPECT_EQ(ps.updates, 500);
  EXPECT_EQ(ps.collocation, 5000);
  PITrainConfig bad = tiny_config();
  bad.updates = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = tiny_config();
  bad.tol = -1.0;
  EXPECT_THROW(bad.validate(), Error);
}

}  // namespace
}  // namespace hjipi
