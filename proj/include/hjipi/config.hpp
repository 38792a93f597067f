// Run configuration for the command line tool. A run is described by a JSON
// tree with sections `problem`, `training`, `fdm`, `compare`, `trajectories`
// and `probe` plus the top-level keys `seed`, `out`, `workers` and
// `deterministic`. Every key is optional; missing keys take the defaults of
// the selected problem kind. Unknown keys are rejected.

#ifndef HJIPI_CONFIG_HPP
#define HJIPI_CONFIG_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

#include "hjipi/analysis.hpp"
#include "hjipi/fdm.hpp"
#include "hjipi/path_planning.hpp"
#include "hjipi/pinn.hpp"
#include "hjipi/pubsub.hpp"

namespace hjipi {

enum class Subcommand {
  kSolvePinnPi,
  kSolveDirect,
  kSolveFdm,
  kCompare,
  kTrajectories,
  kProbeTheory,
};

const char* subcommand_name(Subcommand sub);
Subcommand parse_subcommand(const std::string& name);

enum class ProblemKind { kPathPlanning, kPubSub };

struct ProblemSection {
  ProblemKind kind = ProblemKind::kPathPlanning;
  PathPlanningParams path_planning;
  PubSubParams pubsub;
  Box domain;  // training domain
  Box target;

  int dim() const;
  std::string label() const;
};

struct CompareSection {
  std::string network;
  std::string reference;
  std::vector<double> times;
  std::string method = "pinn";
  Eigen::Index samples = 4096;  // scattered points when the reference is pairwise
  TimeInterpolation interpolation = TimeInterpolation::kLinear;
};

struct TrajectorySection {
  std::string network;
  Eigen::VectorXd x0;
  double dt = 0.01;
  long steps = 0;  // 0: horizon / dt
  long paths = 16;
  Disturbance disturbance = Disturbance::kAdversarial;
};

struct ProbeSection {
  long samples = 10000;
  double p_radius = 1.0;
  double min_dp = 1e-3;
  SelectorComponent component = SelectorComponent::kA;
};

struct RunConfig {
  Subcommand subcommand = Subcommand::kSolvePinnPi;
  ProblemSection problem;
  PITrainConfig training;
  bool checkpoints = false;
  FDMConfig fdm;
  bool binary_grid = false;
  CompareSection compare;
  TrajectorySection trajectories;
  ProbeSection probe;
  std::string out = "out";
  std::uint64_t seed = 0;
  int workers = 1;
  bool deterministic = false;
};

// Dotted key and value; the value is read as JSON, or as a string when it
// does not parse.
struct ConfigOverride {
  std::string key;
  std::string value;
};

// `text` may be empty. Overrides are applied to the tree before defaults and
// validation, so they take precedence over file values.
RunConfig parse_config(Subcommand sub, const std::string& text,
                       const std::vector<ConfigOverride>& overrides = {});

// Reads `path` (empty: no file). A missing file is a missing-input error.
RunConfig load_config(Subcommand sub, const std::string& path,
                      const std::vector<ConfigOverride>& overrides = {});

// Fully resolved configuration as pretty-printed JSON. Parsing it back gives
// the same RunConfig.
std::string config_to_json(const RunConfig& config);

GameProblem make_problem(const ProblemSection& section);

}  // namespace hjipi

#endif  // HJIPI_CONFIG_HPP
