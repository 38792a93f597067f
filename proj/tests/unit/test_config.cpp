#include <gtest/gtest.h>

#include <string>

#include "hjipi/config.hpp"

namespace hjipi {
namespace {

ErrorCategory category_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.category();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCategory::kInvalidArgument;
}

std::string message_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

TEST(ConfigTest, EmptyPubSubConfigTakesTableDefaults) {
  const RunConfig c = parse_config(Subcommand::kSolvePinnPi, R"({"problem": {"kind": "pubsub", "n": 5}})");
  EXPECT_EQ(c.problem.kind, ProblemKind::kPubSub);
  EXPECT_EQ(c.training.epochs, 5000);
  EXPECT_EQ(c.training.updates, 500);
  EXPECT_EQ(c.training.collocation, 5000);
  EXPECT_EQ(c.training.resample_interval, 100);
  EXPECT_EQ(c.training.hidden, (std::vector<int>{64, 64, 64}));
  ASSERT_EQ(c.problem.domain.dim(), 5);
  EXPECT_TRUE(c.problem.domain.lower.isApproxToConstant(-1.5));
  EXPECT_TRUE(c.problem.domain.upper.isApproxToConstant(1.5));
  EXPECT_TRUE(c.problem.target.lower.isApproxToConstant(-0.5));
  EXPECT_TRUE(c.problem.target.upper.isApproxToConstant(0.5));
  EXPECT_EQ(c.fdm.points, 151);
  EXPECT_DOUBLE_EQ(c.problem.pubsub.horizon, 0.5);
}

TEST(ConfigTest, EmptyConfigIsPathPlanning) {
  const RunConfig c = parse_config(Subcommand::kSolveFdm, "");
  EXPECT_EQ(c.problem.kind, ProblemKind::kPathPlanning);
  EXPECT_EQ(c.training.epochs, 1000);
  EXPECT_EQ(c.training.updates, 1000);
  EXPECT_EQ(c.training.collocation, 2000);
  EXPECT_EQ(c.training.hidden, (std::vector<int>{64, 64, 64, 64}));
  EXPECT_TRUE(c.problem.domain.lower.isApproxToConstant(-1.0));
  EXPECT_TRUE(c.problem.target.upper.isApproxToConstant(1.0));
  EXPECT_EQ(c.fdm.points, 201);
  EXPECT_TRUE(c.fdm.extended.lower.isApproxToConstant(-2.0));
  EXPECT_TRUE(c.fdm.target.upper.isApproxToConstant(1.0));
  EXPECT_EQ(c.compare.times, (std::vector<double>{0.0, 0.25, 0.5, 0.75}));
  EXPECT_EQ(c.trajectories.steps, 100);
}

TEST(ConfigTest, UnknownKeysAreRejectedByName) {
  for (const char* text : {R"({"trainng": {}})", R"({"training": {"epochz": 3}})",
                           R"({"training": {"minimax": {"stepz": 1}}})",
                           R"({"problem": {"domain": {"lowr": 0}}})"}) {
    const std::string msg = message_of([&] { parse_config(Subcommand::kSolvePinnPi, text); });
    EXPECT_NE(msg.find("unknown key"), std::string::npos) << text;
    EXPECT_EQ(category_of([&] { parse_config(Subcommand::kSolvePinnPi, text); }), ErrorCategory::kConfig);
  }
  EXPECT_NE(message_of([] { parse_config(Subcommand::kSolvePinnPi, R"({"training": {"minimax": {"stepz": 1}}})"); })
                .find("'training.minimax.stepz'"),
            std::string::npos);
}

TEST(ConfigTest, KeysOfTheOtherProblemKindAreRejected) {
  EXPECT_NE(message_of([] { parse_config(Subcommand::kSolvePinnPi, R"({"problem": {"n": 3}})"); })
                .find("'problem.n'"),
            std::string::npos);
  EXPECT_NE(message_of([] {
              parse_config(Subcommand::kSolvePinnPi, R"({"problem": {"kind": "pubsub", "lambda1": 1}})");
            }).find("'problem.lambda1'"),
            std::string::npos);
}

TEST(ConfigTest, OverridesWinOverFileValues) {
  const std::string text = R"({"seed": 3, "training": {"epochs": 7, "hidden": [4, 4]}})";
  const RunConfig c = parse_config(Subcommand::kSolvePinnPi, text,
                                   {{"training.epochs", "11"}, {"seed", "9"}, {"training.hidden", "[5]"}});
  EXPECT_EQ(c.training.epochs, 11);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.training.seed, 9u);
  EXPECT_EQ(c.training.hidden, (std::vector<int>{5}));
  // Bare strings need no quoting.
  EXPECT_EQ(parse_config(Subcommand::kSolvePinnPi, "", {{"problem.kind", "pubsub"}}).problem.kind,
            ProblemKind::kPubSub);
  // Overrides create missing sections.
  EXPECT_EQ(parse_config(Subcommand::kSolveFdm, "{}", {{"fdm.points", "41"}}).fdm.points, 41);
}

TEST(ConfigTest, WorkersReachEveryModule) {
  const RunConfig c = parse_config(Subcommand::kSolvePinnPi, R"({"workers": 3})");
  EXPECT_EQ(c.training.engine.workers, 3);
  EXPECT_EQ(c.fdm.workers, 3);
}

TEST(ConfigTest, MalformedAndMistypedInputIsAConfigError) {
  EXPECT_EQ(category_of([] { parse_config(Subcommand::kSolvePinnPi, "{ not json"); }), ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] { parse_config(Subcommand::kSolvePinnPi, "[1, 2]"); }), ErrorCategory::kConfig);
  EXPECT_NE(message_of([] { parse_config(Subcommand::kSolvePinnPi, R"({"training": {"epochs": "many"}})"); })
                .find("'training.epochs'"),
            std::string::npos);
  EXPECT_EQ(category_of([] { parse_config(Subcommand::kSolvePinnPi, R"({"training": {"epochs": 1.5}})"); }),
            ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] { parse_config(Subcommand::kSolvePinnPi, R"({"training": {"form": "odd"}})"); }),
            ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] { parse_config(Subcommand::kSolvePinnPi, R"({"problem": {"lambda1": -1}})"); }),
            ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] { parse_config(Subcommand::kSolvePinnPi, R"({"problem": {"domain": {"lower": [0, 0, 0]}}})"); }),
            ErrorCategory::kConfig);
  EXPECT_EQ(category_of([] {
              parse_config(Subcommand::kSolvePinnPi, R"({"problem": {"target": {"upper": 3}}})");
            }),
            ErrorCategory::kConfig);
  // Integral floats are accepted for integer keys.
  EXPECT_EQ(parse_config(Subcommand::kSolvePinnPi, R"({"training": {"epochs": 1e3}})").training.epochs, 1000);
}

TEST(ConfigTest, ContradictorySettingsAreRejected) {
  EXPECT_EQ(category_of([] { parse_config(Subcommand::kSolvePinnPi, R"({"training": {"form": "plain"}})"); }),
            ErrorCategory::kConfig);
  EXPECT_NO_THROW(parse_config(Subcommand::kSolvePinnPi,
                               R"({"training": {"form": "plain", "terminal_points": 100}})"));
  EXPECT_EQ(category_of([] {
              parse_config(Subcommand::kSolvePinnPi, R"({"deterministic": true, "training": {"chunk_size": "auto"}})");
            }),
            ErrorCategory::kConfig);
  const RunConfig c =
      parse_config(Subcommand::kSolvePinnPi, R"({"workers": 4, "training": {"chunk_size": "auto", "collocation": 10}})");
  EXPECT_EQ(c.training.engine.chunk_size, 3);
}

TEST(ConfigTest, ResolvedConfigRoundTrips) {
  const RunConfig a = parse_config(
      Subcommand::kCompare,
      R"({"problem": {"kind": "pubsub", "n": 3, "anisotropy": 0.2, "sigma_seed": 12345678901234},
          "training": {"learning_rate": 0.0003, "selector": "numeric", "precision": "float64"},
          "compare": {"times": [0, 0.1], "interpolation": "nearest"},
          "probe": {"component": "both"}, "seed": 18446744073709551615, "deterministic": true})");
  const std::string text = config_to_json(a);
  const RunConfig b = parse_config(Subcommand::kCompare, text);
  EXPECT_EQ(config_to_json(b), text);
  EXPECT_EQ(b.seed, 18446744073709551615ull);
  EXPECT_EQ(b.problem.pubsub.sigma_seed, 12345678901234ull);
  EXPECT_EQ(b.training.adam.learning_rate, 0.0003);
  EXPECT_EQ(b.compare.interpolation, TimeInterpolation::kNearest);
  EXPECT_EQ(b.probe.component, SelectorComponent::kBoth);
}

TEST(ConfigTest, MissingConfigFileIsMissingInput) {
  EXPECT_EQ(category_of([] { load_config(Subcommand::kSolveFdm, "/nonexistent/run.json"); }),
            ErrorCategory::kMissingInput);
  EXPECT_NO_THROW(load_config(Subcommand::kSolveFdm, ""));
}

TEST(ConfigTest, ProblemUsesConfiguredDomains) {
  const RunConfig c = parse_config(Subcommand::kSolvePinnPi,
                                   R"({"problem": {"domain": {"lower": -1.2, "upper": 1.2},
                                                   "target": {"lower": [-1, -0.5], "upper": 0.5}}})");
  const GameProblem p = make_problem(c.problem);
  EXPECT_TRUE(p.training_domain.upper.isApproxToConstant(1.2));
  EXPECT_EQ(p.target_domain.lower, Eigen::Vector2d(-1.0, -0.5));
  EXPECT_EQ(c.problem.label(), "path_planning");
}

TEST(ConfigTest, SubcommandNames) {
  for (Subcommand s : {Subcommand::kSolvePinnPi, Subcommand::kSolveDirect, Subcommand::kSolveFdm,
                       Subcommand::kCompare, Subcommand::kTrajectories, Subcommand::kProbeTheory}) {
    EXPECT_EQ(parse_subcommand(subcommand_name(s)), s);
  }
  EXPECT_EQ(category_of([] { parse_subcommand("solve"); }), ErrorCategory::kInvalidArgument);
}

}  // namespace
}  // namespace hjipi
