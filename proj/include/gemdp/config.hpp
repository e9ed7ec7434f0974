#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gemdp/learning.hpp"
#include "gemdp/policy_sim.hpp"
#include "gemdp/statics.hpp"
#include "gemdp/welfare.hpp"

namespace gemdp {

struct SolveSection {
  UserType user;
  SolveOptions options;
};

struct SimulationSection {
  SimConfig sim;
  PolicyKind policy = PolicyKind::OptimalDP;
};

struct AblationSection {
  int n_users = 300;
  std::vector<std::string> conditions;
  std::vector<PolicyKind> policies;
};

struct SweepSection {
  SweepParam param = SweepParam::Omega;
  std::vector<double> grid;
  Anchor anchor;
  MarketParams market;  // top-level market with the section's overrides
};

struct CutoffSection {
  Anchor anchor;
  double omega_low = 0.0;
  double omega_high = 0.5;
  int resolution = 16;
};

struct LearningSection {
  UserType user;
  double eta = 0.5;
  std::vector<std::size_t> n_records;
  int r_bins = 2;
  int psi_bins = 2;
  MarketParams market;
};

struct WelfareSection {
  UserType user;
  WelfareParams params;
};

/// A fully validated experiment: the compiled-in defaults with the user's
/// file and any overrides merged on top.
struct ExperimentConfig {
  std::string source;
  nlohmann::json resolved;  // merged document, echoed into the manifest
  MarketParams market;
  PopulationSpec population;
  std::vector<std::uint64_t> seeds;
  int threads = 1;
  SolveSection solve;
  SimulationSection simulation;
  AblationSection ablation;
  SweepSection sweep;
  CutoffSection cutoff;
  LearningSection learning;
  WelfareSection welfare;
};

/// The compiled-in defaults document (market.beta absent).
const nlohmann::json& default_document();

/// Default calibration with the given discount factor.
MarketParams default_market_params(double beta);

/// Merges `doc` and then `overrides` over the defaults and validates the
/// result. Unknown keys, wrong types and constraint violations throw
/// ConfigError naming `source`, the dotted key and the rule.
ExperimentConfig parse_config(const nlohmann::json& doc, const std::string& source,
                              const nlohmann::json& overrides = nlohmann::json::object());

/// Reads and parses a JSON file; parse errors are reported as ConfigError.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const nlohmann::json& overrides = nlohmann::json::object());

}  // namespace gemdp
