#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "heat_oracle.hpp"
#include "hjipi/fdm.hpp"

namespace hjipi {
namespace {

using testing::HeatOracle;

// Synthetic grid whose values are an affine function of (t, x).
TimeGrid affine_grid(const Box& extent, std::vector<int> points, int slices) {
  TimeGrid g;
  g.extent = extent;
  g.points = std::move(points);
  g.dt = 0.01;
  g.steps = slices - 1;
  for (int s = 0; s < slices; ++s) {
    const double t = 0.5 * s / (slices - 1);
    g.times.push_back(t);
    Eigen::VectorXd v(g.num_nodes());
    for (Eigen::Index f = 0; f < v.size(); ++f) {
      const Eigen::VectorXd x = g.node(f);
      v[f] = 1.0 + 2.0 * t - 0.5 * x[0] + 3.0 * x[x.size() - 1];
    }
    g.slices.push_back(std::move(v));
  }
  return g;
}

double affine(double t, VecRef x) { return 1.0 + 2.0 * t - 0.5 * x[0] + 3.0 * x[x.size() - 1]; }

FDMConfig heat_config(int points) {
  FDMConfig c;
  c.extended = Box::cube(2, -1.5, 1.5);
  c.target = Box::cube(2, -0.75, 0.75);
  c.points = points;
  c.saved_slices = 11;
  return c;
}

FDMConfig small_pubsub_config() {
  FDMConfig c = FDMConfig::pubsub_defaults();
  c.points = 61;
  c.saved_slices = 11;
  return c;
}

PubSubParams short_pubsub(int n) {
  PubSubParams p;
  p.n = n;
  p.horizon = 0.1;
  return p;
}

TEST(FDMTest, ConstantTerminalIsPreserved) {
  GameProblem p = HeatOracle{}.problem();
  p.terminal.value = [](VecRef) { return 3.0; };
  const TimeGrid g = fdm_solve_2d(p, heat_config(31));
  for (const auto& slice : g.slices) {
    EXPECT_EQ(slice.minCoeff(), 3.0);
    EXPECT_EQ(slice.maxCoeff(), 3.0);
  }
  EXPECT_EQ(g.times.front(), 0.0);
  EXPECT_EQ(g.times.back(), p.horizon);
}

TEST(FDMTest, TerminalSliceEqualsTerminalCost) {
  const GameProblem p = HeatOracle{}.problem();
  const TimeGrid g = fdm_solve_2d(p, heat_config(31));
  for (Eigen::Index f = 0; f < g.num_nodes(); ++f) {
    EXPECT_EQ(g.slices.back()[f], p.terminal.value(g.node(f)));
  }
}

TEST(FDMTest, HeatKernelConvergesAtSecondOrder) {
  const HeatOracle oracle;
  const GameProblem p = oracle.problem();
  std::vector<double> errors;
  for (int n : {31, 61, 121}) {
    const TimeGrid g = fdm_solve_2d(p, heat_config(n));
    const RestrictResult r = restrict_to_target(g, heat_config(n).target);
    double err = 0.0;
    for (Eigen::Index f = 0; f < r.grid.num_nodes(); ++f) {
      const Eigen::VectorXd x = r.grid.node(f);
      err = std::max(err, std::abs(r.grid.slices.front()[f] - oracle.exact(0.0, x)));
    }
    errors.push_back(err);
  }
  for (std::size_t k = 1; k < errors.size(); ++k) {
    EXPECT_GT(std::log2(errors[k - 1] / errors[k]), 1.7) << "refinement " << k;
  }
  EXPECT_LT(errors.back(), 1e-3);
}

TEST(FDMTest, StepPlanRespectsBoundsAndSliceCount) {
  const GameProblem p = make_pubsub_pair_problem({}, 0.1 * Eigen::MatrixXd::Identity(2, 2), 1);
  FDMConfig c = FDMConfig::pubsub_defaults();
  const StepPlan plan = plan_steps(p, c);
  EXPECT_EQ(plan.steps % (c.saved_slices - 1), 0);
  EXPECT_EQ(plan.steps, plan.steps_per_slice * (c.saved_slices - 1));
  EXPECT_LE(plan.dt, plan.dt_dx2 * (1 + 1e-12));
  EXPECT_LE(plan.dt, plan.dt_diffusion * (1 + 1e-12));
  EXPECT_LE(plan.dt, plan.dt_advection * (1 + 1e-12));
  EXPECT_NEAR(plan.dt * plan.steps, p.horizon, 1e-12);

  c.steps_requested = 10 * plan.steps;
  const StepPlan finer = plan_steps(p, c);
  EXPECT_GE(finer.steps, c.steps_requested);
}

TEST(FDMTest, SolveIsIndependentOfWorkerCount) {
  const GameProblem p = make_pubsub_pair_problem(short_pubsub(2), 0.1 * Eigen::MatrixXd::Identity(2, 2), 1);
  FDMConfig c = small_pubsub_config();
  const TimeGrid one = fdm_solve_2d(p, c);
  c.workers = 3;
  const TimeGrid three = fdm_solve_2d(p, c);
  for (std::size_t s = 0; s < one.slices.size(); ++s) EXPECT_EQ(one.slices[s], three.slices[s]);
}

TEST(FDMTest, NonFiniteHamiltonianIsReported) {
  GameProblem p = HeatOracle{}.problem();
  p.hamiltonian = [](double, VecRef, VecRef) { return std::nan(""); };
  try {
    fdm_solve_2d(p, heat_config(21));
    FAIL() << "expected a numerical error";
  } catch (const Error& e) {
    EXPECT_EQ(e.category(), ErrorCategory::kNumerical);
  }
}

TEST(FDMTest, RejectsProblemsWithoutClosedFormHamiltonian) {
  GameProblem p = HeatOracle{}.problem();
  p.hamiltonian = nullptr;
  EXPECT_THROW(fdm_solve_2d(p, heat_config(21)), Error);
}

TEST(RestrictTest, ExtractsCentralBlockExactly) {
  const TimeGrid g = affine_grid(Box::cube(2, -2.0, 2.0), {201, 201}, 3);
  const RestrictResult r = restrict_to_target(g, Box::cube(2, -1.0, 1.0));
  EXPECT_FALSE(r.snapped);
  ASSERT_EQ(r.grid.points, (std::vector<int>{101, 101}));
  EXPECT_EQ(r.grid.extent.lower[0], -1.0);
  EXPECT_EQ(r.grid.extent.upper[1], 1.0);
  for (std::size_t s = 0; s < g.slices.size(); ++s) {
    for (int i = 0; i < 101; ++i) {
      for (int j = 0; j < 101; ++j) {
        EXPECT_EQ(r.grid.slices[s][r.grid.flat_index({i, j})],
                  g.slices[s][g.flat_index({i + 50, j + 50})]);
      }
    }
  }
}

TEST(RestrictTest, FullTargetIsIdentity) {
  const TimeGrid g = affine_grid(Box::cube(2, -1.5, 1.5), {31, 41}, 2);
  const RestrictResult r = restrict_to_target(g, g.extent);
  EXPECT_FALSE(r.snapped);
  EXPECT_EQ(r.grid.points, g.points);
  EXPECT_EQ(r.grid.extent.lower, g.extent.lower);
  EXPECT_EQ(r.grid.extent.upper, g.extent.upper);
  for (std::size_t s = 0; s < g.slices.size(); ++s) EXPECT_EQ(r.grid.slices[s], g.slices[s]);
}

TEST(RestrictTest, OffGridTargetIsSnappedAndReported) {
  const TimeGrid g = affine_grid(Box::cube(2, -1.0, 1.0), {11, 11}, 2);
  const RestrictResult r = restrict_to_target(g, Box::cube(2, -0.47, 0.52));
  EXPECT_TRUE(r.snapped);
  EXPECT_FALSE(r.report.empty());
  EXPECT_NEAR(r.grid.extent.lower[0], -0.4, 1e-15);
  EXPECT_NEAR(r.grid.extent.upper[0], 0.6, 1e-15);
  EXPECT_EQ(r.grid.points[0], 6);
}

TEST(RestrictTest, TargetOutsideExtentThrows) {
  const TimeGrid g = affine_grid(Box::cube(2, -1.0, 1.0), {11, 11}, 2);
  EXPECT_THROW(restrict_to_target(g, Box::cube(2, -1.5, 0.5)), Error);
}

TEST(InterpolateTest, ExactOnAffineFields) {
  const TimeGrid g = affine_grid(Box::cube(2, -1.0, 1.0), {21, 17}, 6);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0), ut(0.0, 0.5);
  for (int k = 0; k < 200; ++k) {
    const double t = ut(rng);
    const Eigen::Vector2d x(u(rng), u(rng));
    EXPECT_NEAR(interpolate(g, t, x), affine(t, x), 1e-12);
  }
  EXPECT_NEAR(interpolate(g, 0.5, Eigen::Vector2d(1.0, 1.0)), affine(0.5, Eigen::Vector2d(1.0, 1.0)),
              1e-12);
}

TEST(InterpolateTest, NodesAndStoredTimesAreExact) {
  TimeGrid g = affine_grid(Box::cube(2, -1.0, 1.0), {21, 21}, 4);
  std::mt19937_64 rng(9);
  for (auto& slice : g.slices) {
    for (Eigen::Index f = 0; f < slice.size(); ++f) slice[f] = std::normal_distribution<double>()(rng);
  }
  for (std::size_t s = 0; s < g.times.size(); ++s) {
    for (Eigen::Index f = 0; f < g.num_nodes(); f += 37) {
      EXPECT_EQ(interpolate(g, g.times[s], g.node(f)), g.slices[s][f]);
    }
  }
}

TEST(InterpolateTest, NearestSliceMode) {
  const TimeGrid g = affine_grid(Box::cube(2, -1.0, 1.0), {5, 5}, 3);
  const Eigen::Vector2d x(0.5, 0.5);
  EXPECT_EQ(interpolate(g, 0.1, x, TimeInterpolation::kNearest), interpolate(g, 0.0, x));
  EXPECT_EQ(interpolate(g, 0.2, x, TimeInterpolation::kNearest), interpolate(g, 0.25, x));
}

TEST(InterpolateTest, OutsideThrows) {
  const TimeGrid g = affine_grid(Box::cube(2, -1.0, 1.0), {5, 5}, 3);
  EXPECT_THROW(interpolate(g, 0.1, Eigen::Vector2d(1.1, 0.0)), Error);
  EXPECT_THROW(interpolate(g, 0.6, Eigen::Vector2d(0.0, 0.0)), Error);
  EXPECT_THROW(interpolate(g, 0.1, Eigen::Vector3d(0.0, 0.0, 0.0)), Error);
}

void expect_same(const TimeGrid& a, const TimeGrid& b) {
  EXPECT_EQ(a.points, b.points);
  EXPECT_EQ(a.extent.lower, b.extent.lower);
  EXPECT_EQ(a.extent.upper, b.extent.upper);
  EXPECT_EQ(a.dt, b.dt);
  EXPECT_EQ(a.steps, b.steps);
  EXPECT_EQ(a.times, b.times);
  ASSERT_EQ(a.slices.size(), b.slices.size());
  for (std::size_t s = 0; s < a.slices.size(); ++s) EXPECT_EQ(a.slices[s], b.slices[s]);
}

TimeGrid noisy_grid() {
  TimeGrid g = affine_grid(Box::cube(2, -1.3, 0.7), {7, 9}, 3);
  std::mt19937_64 rng(3);
  for (auto& slice : g.slices) {
    for (Eigen::Index f = 0; f < slice.size(); ++f) slice[f] = std::normal_distribution<double>()(rng) / 3.0;
  }
  return g;
}

TEST(GridIOTest, CsvRoundTripIsExact) {
  const TimeGrid g = noisy_grid();
  std::stringstream ss;
  write_grid_csv(g, ss);
  expect_same(read_grid_csv(ss), g);
}

TEST(GridIOTest, BinaryRoundTripIsExact) {
  const TimeGrid g = noisy_grid();
  std::stringstream ss;
  write_grid_binary(g, ss);
  expect_same(read_grid_binary(ss), g);
}

TEST(GridIOTest, SaveAndLoadDispatchOnFormat) {
  const TimeGrid g = noisy_grid();
  const auto dir = std::filesystem::temp_directory_path() / "hjipi_grid_io";
  std::filesystem::create_directories(dir);
  for (const char* name : {"grid.csv", "grid.bin"}) {
    const std::string path = (dir / name).string();
    save_grid(g, path);
    expect_same(load_grid(path), g);
  }
  std::filesystem::remove_all(dir);
}

TEST(GridIOTest, MalformedInputThrows) {
  std::stringstream bad("# hjipi-grid v1\n# dim 2\n# axis 0 0 1 3 0.5\n");
  EXPECT_THROW(read_grid_csv(bad), Error);
  std::stringstream junk("not a grid");
  EXPECT_THROW(read_grid_csv(junk), Error);
  std::stringstream truncated;
  write_grid_binary(noisy_grid(), truncated);
  std::string bytes = truncated.str();
  std::stringstream cut(bytes.substr(0, bytes.size() - 5));
  EXPECT_THROW(read_grid_binary(cut), Error);
  EXPECT_THROW(load_grid("/nonexistent/grid.csv"), Error);
}

TEST(PairwiseReferenceTest, TwoDimensionsMatchesDirectSolve) {
  const PubSubParams params = short_pubsub(2);
  const FDMConfig c = small_pubsub_config();
  const PairwiseReference ref = reference_nd_isotropic(params, c);
  const TimeGrid direct = fdm_solve_2d(make_pubsub_problem(params), c);
  for (std::size_t s = 0; s < direct.times.size(); s += 3) {
    for (Eigen::Index f = 0; f < direct.num_nodes(); f += 53) {
      EXPECT_EQ(ref.value(direct.times[s], direct.node(f)), direct.slices[s][f]);
    }
  }
}

TEST(PairwiseReferenceTest, TerminalSliceSumsPairCosts) {
  const PubSubParams params = short_pubsub(4);
  const FDMConfig c = small_pubsub_config();
  const PairwiseReference ref = reference_nd_isotropic(params, c);
  const TimeGrid& pair = ref.pair_grid(1);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> idx(0, c.points - 1);
  for (int k = 0; k < 50; ++k) {
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = pair.node(pair.flat_index({idx(rng), 0}))[0];
    EXPECT_NEAR(ref.value(params.horizon, x), pubsub_terminal_cost(params, x), 1e-12);
  }
}

TEST(PairwiseReferenceTest, AnisotropicDiffusionIsRejected) {
  PubSubParams params = short_pubsub(3);
  params.anisotropy = 0.2;
  EXPECT_THROW(reference_nd_isotropic(params, small_pubsub_config()), Error);
}

}  // namespace
}  // namespace hjipi
