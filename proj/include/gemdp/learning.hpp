#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gemdp/dp.hpp"

namespace gemdp {

/// One logged pre-subscription step.
struct LogRecord {
  std::uint64_t user_id = 0;
  UserType user;
  QueryDraw query;
  UserState state;
  Action action = Action::Ad;
  bool engaged = false;
  double payoff = 0.0;
  UserState next;
  bool returned = false;
};

/// How logs are generated. Users come from `fixed_user` if set, otherwise from
/// `population`; queries come from `query_panel` (by weight) if set,
/// otherwise from `population`. States are uniform over the grid cells where
/// the user has not converted.
struct LogDesign {
  MarketParams market;
  PopulationSpec population;
  std::optional<UserType> fixed_user;
  std::optional<QueryPanel> query_panel;
  /// Behaviour policy: Free with probability eta, Ad otherwise.
  double eta = 0.5;

  void validate() const;
};

/// Record i depends only on (seed, i), so a longer log extends a shorter one.
std::vector<LogRecord> generate_logs(const LogDesign& design, std::size_t n_records,
                                     std::uint64_t seed, int threads = 1);

/// Columns: user_id, gamma, theta, r, psi, s, c, action, engaged, payoff,
/// next_s, next_c, next_z, returned.
void write_logs_csv(std::ostream& os, std::span<const LogRecord> logs);
std::vector<LogRecord> read_logs_csv(std::istream& is);

/// Uniform bins on (gamma, theta, r, psi).
struct Binning {
  int gamma_bins = 1;
  int theta_bins = 1;
  int r_bins = 2;
  int psi_bins = 2;

  void validate() const;
  std::size_t size() const;
  std::size_t index(const UserType& user, const QueryDraw& query) const;
  std::array<int, 4> coords(std::size_t index) const;
  /// Centre of bin k of n on [0,1].
  static double center(int k, int n) { return (k + 0.5) / n; }
};

struct EstimationErrors {
  double eps_m = 0.0;
  double eps_r = 0.0;
  double eps_rho = 0.0;
  /// True when the truth varies inside a bin, so the sup over records is only
  /// a lower estimate of the sup over the bin.
  bool approximate = false;
};

struct EstimatedPrimitives {
  Binning binning;
  GridCaps grid;
  std::array<std::vector<double>, 2> engage;  // [action][bin]
  std::array<std::vector<double>, 2> reward;
  std::array<std::vector<std::size_t>, 2> count;
  std::vector<double> retention;  // [(s * (c_max+1) + c) * 2 + z]
  std::vector<std::size_t> retention_count;
  std::vector<char> retention_pooled;  // cell had no records; filled with the pooled mean
  std::optional<EstimationErrors> errors;

  std::size_t retention_index(int s, int c, bool z) const {
    return (static_cast<std::size_t>(s) * static_cast<std::size_t>(grid.c_max + 1) +
            static_cast<std::size_t>(c)) * 2 + (z ? 1 : 0);
  }
  double retention_at(const UserState& st) const;
  bool occupied(std::size_t bin) const { return count[0][bin] + count[1][bin] > 0; }
};

/// Binned empirical means. Throws std::invalid_argument naming the bin when an
/// occupied bin lacks records for one action. With `truth`, the errors are the
/// sup over logged points of |estimate - truth|.
EstimatedPrimitives estimate_primitives(std::span<const LogRecord> logs, const Binning& binning,
                                        const GridCaps& grid,
                                        const MarketParams* truth = nullptr);

/// Columns: table, action, gamma_bin, theta_bin, r_bin, psi_bin, s, c, z,
/// estimate, count. Unused columns are blank.
void write_estimates_csv(std::ostream& os, const EstimatedPrimitives& est);
EstimatedPrimitives read_estimates_csv(std::istream& is);

/// Decision model with estimated engagement, flow and retention; transitions,
/// conversion and the subscription margin are known.
class EstimatedModel final : public DecisionModel {
public:
  EstimatedModel(MarketParams known, UserType user, EstimatedPrimitives estimates);

  const MarketParams& market() const override { return params_; }
  const UserType& user() const override { return user_; }
  ActionTerms terms(const UserState& state, const QueryDraw& query, Action action) const override;
  double subscribed_flow() const override { return params_.subscription_margin(); }

  const EstimatedPrimitives& estimates() const { return est_; }

private:
  MarketParams params_;
  UserType user_;
  EstimatedPrimitives est_;
};

struct PluginSolve {
  ValueTable values;
  std::vector<Action> decisions;  // [cell * panel_size + j]
};

PluginSolve plugin_policy(const EstimatedModel& model, const QueryPanel& panel,
                          const SolveOptions& options = {});

/// eps_r + beta (2 eps_m + eps_rho) v_max.
double learning_error_bound(double eps_r, double eps_m, double eps_rho, double beta, double v_max);

struct BoundsReport {
  double r_max = 0.0;
  double v_max = 0.0;
  double eps_m = 0.0;
  double eps_r = 0.0;
  double eps_rho = 0.0;
  double b = 0.0;
  double value_gap = 0.0, value_bound = 0.0;
  double edge_gap = 0.0, edge_bound = 0.0;
  double regret = 0.0, regret_bound = 0.0;
  std::size_t points = 0;
  std::size_t margin_points = 0;
  std::size_t agreements = 0;
  bool value_ok = true, edge_ok = true, agreement_ok = true, regret_ok = true;
  std::string witness;

  bool ok() const { return value_ok && edge_ok && agreement_ok && regret_ok; }
};

/// Solves both models on `panel` and checks the four plug-in bounds. The
/// errors are recomputed exactly over every (cell, query, action, outcome)
/// the operators touch. Requires options.tol <= 1e-9.
BoundsReport verify_bounds(const DecisionModel& truth, const DecisionModel& plugin,
                           const QueryPanel& panel, const SolveOptions& options);

// ---------------------------------------------------------------------------

/// A bin-constant synthetic truth: a fixed user, queries on the bin centres,
/// and engagement and revenue that ignore (s, c).
struct LearningSetup {
  MarketParams market;
  UserType user;
  double eta = 0.5;
  Binning binning;
  QueryPanel panel;

  LogDesign design() const;
};

/// Throws ConfigError when the market lets engagement or revenue depend on the
/// state (uc_ad, b_c, b_s nonzero).
LearningSetup make_learning_setup(const MarketParams& market, const UserType& user, double eta,
                                  int r_bins, int psi_bins);

struct LearningRow {
  std::size_t n_records = 0;
  EstimationErrors errors;
  BoundsReport bounds;
};

std::vector<LearningRow> run_learning(const LearningSetup& setup,
                                      std::span<const std::size_t> n_records, std::uint64_t seed,
                                      const SolveOptions& options, int threads = 1);

void write_learning_csv(std::ostream& os, std::span<const LearningRow> rows);

}  // namespace gemdp
