#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mpforge/concentration.hpp"
#include "mpforge/general_se.hpp"
#include "mpforge/problem.hpp"
#include "mpforge/solvers.hpp"
#include "mpforge/state_evolution.hpp"

namespace mpforge {

/// One value of the flat config format. Scalars keep their source text.
struct ConfigValue {
  enum class Kind { string, number, boolean, list };
  Kind kind = Kind::string;
  std::string text;
  std::vector<ConfigValue> items;  // list only
};

using FlatConfig = std::map<std::string, ConfigValue>;

/// Parses `key = value` lines. Values: "quoted string", number, true/false, [v, v, ...].
/// '#' starts a comment outside quotes. Duplicate keys are rejected.
FlatConfig parse_flat_config(std::string_view text);

struct ExperimentConfig {
  ModelSpec model;
  std::string algorithm = "vamp";  // amp | vamp | gvamp | general-gvamp | general-vamp
  std::vector<std::int64_t> sizes{256};
  int trials = 1;
  int iterations = 10;
  SolverConfig solver;
  std::uint64_t seed = 0;
  std::vector<std::string> functionals{"squared_error"};
  std::vector<double> epsilons = kDefaultEpsilons;
  int se_nodes = 64;
  std::int64_t mc_samples = 200000;
  int replicates = 20;
  bool se_literal = false;  // drop error-truth correlations in the SE engines
  std::string output_dir = "out";
};

ExperimentConfig experiment_from_flat(const FlatConfig& flat);
ExperimentConfig parse_experiment_config(std::string_view text);
ExperimentConfig load_experiment_config(const std::string& path);

/// Every key, fixed order, shortest round-trip number formatting.
std::string serialize_config(const ExperimentConfig& cfg);
/// FNV-1a of the canonical serialization with output.dir blanked, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

/// Throws invalid-config naming the offending key.
void validate_config(const ExperimentConfig& cfg);

HarnessConfig harness_config(const ExperimentConfig& cfg, int workers);
SEOptions se_options(const ExperimentConfig& cfg);
GeneralSeOptions general_se_options(const ExperimentConfig& cfg);

}  // namespace mpforge
