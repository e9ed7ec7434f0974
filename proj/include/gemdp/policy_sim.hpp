#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gemdp/dp.hpp"

namespace gemdp {

enum class PolicyKind { OptimalDP, OneStepGreedy, AlwaysAd, AlwaysFree };

std::string_view to_string(PolicyKind k);
/// Accepts "optimal_dp", "one_step_greedy", "always_ad", "always_free".
PolicyKind policy_kind_from_string(std::string_view name);

/// Uniform n x n grid of (gamma, theta) points on [0,1]^2; a type maps to its
/// nearest grid point.
class TypeBinning {
public:
  explicit TypeBinning(int n_bins);

  int n_bins() const { return n_; }
  std::size_t size() const { return static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_); }
  double point(int k) const;
  std::size_t bin(const UserType& user) const;
  UserType center(std::size_t bin) const;

private:
  int nearest(double x) const;
  int n_;
};

/// A display rule. OptimalDP holds one solved table per occupied type bin;
/// OneStepGreedy uses the surrogate table (zero before subscription, v_sub
/// after). Both evaluate the edge with the user's own type for the one-step
/// terms.
class Policy {
public:
  PolicyKind kind() const { return kind_; }
  Action decide(const UserType& user, const UserState& state, const QueryDraw& query) const;
  /// Number of solved type bins (OptimalDP only).
  std::size_t solved_bins() const;
  const TypeBinning& binning() const { return binning_; }

private:
  friend Policy build_policy(PolicyKind, const MarketParams&, const PopulationSpec&, int,
                             std::span<const UserType>, const SolveOptions&, int);

  Policy(PolicyKind kind, MarketParams market, TypeBinning binning)
      : kind_(kind), market_(std::move(market)), binning_(binning) {}

  PolicyKind kind_;
  MarketParams market_;
  TypeBinning binning_;
  std::vector<std::optional<ValueTable>> tables_;  // per bin (OptimalDP)
  std::optional<ValueTable> surrogate_;            // OneStepGreedy
};

/// `users` are the types the policy will face; OptimalDP solves only their
/// bins. Throws ConvergenceError if any bin solve fails.
Policy build_policy(PolicyKind kind, const MarketParams& market, const PopulationSpec& population,
                    int n_bins, std::span<const UserType> users, const SolveOptions& options = {},
                    int threads = 1);

struct SimConfig {
  int n_users = 500;
  int horizon = 20;
  int n_bins = 5;
  MarketParams market;
  PopulationSpec population;

  void validate() const;
};

/// The cohort of a seed: user i has type sample_user(population, seed, i).
std::vector<UserType> cohort_types(const SimConfig& config, std::uint64_t seed);

struct SimEvent {
  enum class Kind { Display, Conversion, Churn };
  int t = 0;
  std::uint32_t user = 0;
  Kind kind = Kind::Display;
  Action action = Action::Ad;  // Display only
  double payoff = 0.0;         // discounted contribution
};

struct EventLog {
  int n_users = 0;
  int horizon = 0;
  double beta = 0.0;
  std::vector<SimEvent> events;  // sorted by (t, user, kind)
};

/// One cohort run under common random numbers. Users are independent given
/// their streams, so `threads` changes nothing but speed.
EventLog simulate_cohort(const SimConfig& config, const Policy& policy, std::uint64_t seed,
                         int threads = 1);

struct Trajectory {
  std::vector<double> cum_payoff;
  std::vector<double> active_users;
  std::vector<double> cum_subscribers;
  std::vector<std::optional<double>> free_exposure_rate;

  double final_payoff = 0.0;
  double final_subscribers = 0.0;
  /// Mean of the defined per-period exposure rates.
  std::optional<double> free_share;
};

/// Throws std::invalid_argument for a log with no users or periods.
Trajectory compute_metrics(const EventLog& log);

/// Pointwise mean over runs; an exposure rate is averaged over the runs where
/// it is defined.
Trajectory mean_trajectory(std::span<const Trajectory> runs);

void write_trajectory_csv(std::ostream& os, const Trajectory& traj);
void write_events_csv(std::ostream& os, const EventLog& log);

// ---------------------------------------------------------------------------
// Sensitivity analysis

/// The eight one-at-a-time variants of the baseline.
std::vector<std::string> ablation_condition_names();

/// Applies a named condition; throws ConfigError("ablation.conditions", ...) for
/// unknown names.
void apply_condition(std::string_view name, MarketParams& market, PopulationSpec& population);

struct RunRecord {
  std::string condition;
  PolicyKind policy = PolicyKind::OptimalDP;
  std::uint64_t seed = 0;
  double final_payoff = 0.0;
  std::optional<double> free_share;
  double subscribers = 0.0;
};

struct ConditionSummary {
  std::string condition;
  std::vector<PolicyKind> policies;
  std::vector<double> payoff_mean, payoff_std, subs_mean, subs_std, free_share_mean;
};

struct AblationResult {
  std::vector<RunRecord> runs;  // condition, then policy, then seed order
  std::vector<ConditionSummary> summary;
};

AblationResult run_ablation(const SimConfig& base, std::span<const std::string> conditions,
                            std::span<const PolicyKind> policies,
                            std::span<const std::uint64_t> seeds, const SolveOptions& options = {},
                            int threads = 1);

void write_runs_csv(std::ostream& os, std::span<const RunRecord> runs);
void write_ablation_summary_csv(std::ostream& os, std::span<const ConditionSummary> rows);

/// Sample mean and (n-1) standard deviation; std is 0 for a single value.
std::pair<double, double> mean_std(std::span<const double> xs);

}  // namespace gemdp
