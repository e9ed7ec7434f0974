#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gemdp/model.hpp"

namespace gemdp {

/// Integer (s, c) grid of pre-subscription states.
class StateGrid {
public:
  StateGrid() = default;
  StateGrid(int s_max, int c_max);
  explicit StateGrid(const GridCaps& caps) : StateGrid(caps.s_max, caps.c_max) {}

  int s_max() const { return s_max_; }
  int c_max() const { return c_max_; }
  std::size_t size() const {
    return static_cast<std::size_t>(s_max_ + 1) * static_cast<std::size_t>(c_max_ + 1);
  }
  std::size_t index(int s, int c) const {
    return static_cast<std::size_t>(s) * static_cast<std::size_t>(c_max_ + 1) +
           static_cast<std::size_t>(c);
  }
  UserState state(std::size_t idx) const;

  friend bool operator==(const StateGrid&, const StateGrid&) = default;

private:
  int s_max_ = 0;
  int c_max_ = 0;
};

/// Discrete query distribution used for the Bellman expectation. A Monte
/// Carlo panel is a uniform-weight panel of frozen draws.
class QueryPanel {
public:
  QueryPanel() = default;
  QueryPanel(std::vector<QueryDraw> draws, std::vector<double> weights);

  static QueryPanel uniform(std::vector<QueryDraw> draws);
  static QueryPanel monte_carlo(const PopulationSpec& population, int n, std::uint64_t seed);
  /// Panel for `params` (n_q draws from `population` at params.panel_seed).
  static QueryPanel for_market(const MarketParams& params, const PopulationSpec& population);

  std::size_t size() const { return draws_.size(); }
  const QueryDraw& draw(std::size_t j) const { return draws_[j]; }
  double weight(std::size_t j) const { return weights_[j]; }
  const std::vector<QueryDraw>& draws() const { return draws_; }

private:
  std::vector<QueryDraw> draws_;
  std::vector<double> weights_;
};

/// One-step primitives of an action at a decision point: the engagement
/// weighted flow, the engagement probability, and for y = 0, 1 the
/// post-update state and its retention probability.
struct ActionTerms {
  double flow = 0.0;
  double engage = 0.0;
  std::array<UserState, 2> post{};
  std::array<double, 2> retention{};
};

/// The primitives a Bellman solve needs for one user type. Implementations:
/// `TrueModel` (the structural model), `EstimatedModel` (learning) and
/// `WelfareModel` (welfare).
class DecisionModel {
public:
  virtual ~DecisionModel() = default;

  virtual const MarketParams& market() const = 0;
  virtual const UserType& user() const = 0;
  virtual ActionTerms terms(const UserState& state, const QueryDraw& query, Action action) const = 0;
  /// Per-period flow in the absorbing subscribed regime.
  virtual double subscribed_flow() const = 0;

  double beta() const { return market().beta; }
  double subscribed_value() const { return subscribed_flow() / (1.0 - beta()); }
  StateGrid grid() const { return StateGrid(market().grid); }
};

class TrueModel final : public DecisionModel {
public:
  TrueModel(MarketParams params, UserType user);

  const MarketParams& market() const override { return params_; }
  const UserType& user() const override { return user_; }
  ActionTerms terms(const UserState& state, const QueryDraw& query, Action action) const override;
  double subscribed_flow() const override { return params_.subscription_margin(); }

private:
  MarketParams params_;
  UserType user_;
};

struct ValueTable {
  StateGrid grid;
  std::vector<double> values;  // pre-subscription values, indexed by grid.index(s, c)
  double v_sub = 0.0;
  UserType user;
  int iterations = 0;
  double final_residual = 0.0;

  double at(int s, int c) const { return values[grid.index(s, c)]; }
  double continuation(const UserState& post) const {
    return post.subscribed ? v_sub : values[grid.index(post.s, post.c)];
  }
  /// Sup norm over the grid and the subscribed value.
  double sup_norm() const;
};

/// Sup-norm distance over the grid values and the subscribed value.
double sup_distance(const ValueTable& a, const ValueTable& b);

struct EdgeReport {
  double q_ad = 0.0;
  double q_free = 0.0;
  double delta = 0.0;
  double short_term = 0.0;
  double long_term = 0.0;
};

/// (p - kappa_paid) / (1 - beta); throws ConfigError for beta outside (0, 1).
double subscribed_value(const MarketParams& params);

/// Starting table for value iteration: zero on the grid, closed-form
/// subscribed value.
ValueTable initial_table(const DecisionModel& model);

/// Bellman operator with the query panel frozen. Construction evaluates every
/// (cell, query, action) primitive once; applications are then pure table
/// arithmetic.
class BellmanOperator {
public:
  BellmanOperator(const DecisionModel& model, QueryPanel panel);

  ValueTable apply(const ValueTable& v) const;
  /// Operator of the fixed decision rule `decisions[cell * panel_size + j]`.
  ValueTable apply_policy(const ValueTable& v, std::span<const Action> decisions) const;

  /// {Q_ad, Q_free} at a grid cell and panel query.
  std::array<double, 2> action_values(std::size_t cell, std::size_t j, const ValueTable& v) const;
  /// Argmax of the action values (ties to Ad) at every (cell, query).
  std::vector<Action> greedy_decisions(const ValueTable& v) const;

  /// max |flow| over grid x panel x actions together with |subscribed flow|.
  double reward_bound() const { return reward_bound_; }

  const StateGrid& grid() const { return grid_; }
  const QueryPanel& panel() const { return panel_; }
  double beta() const { return beta_; }
  double subscribed_flow() const { return subscribed_flow_; }
  const UserType& user() const { return user_; }

private:
  struct Term {
    double flow;
    std::array<double, 2> weight;     // P(Y=y) * rho(post_y)
    std::array<std::int32_t, 2> target;  // grid index, or -1 when post_y is subscribed
  };

  double continuation(const Term& t, const ValueTable& v) const;
  const Term& term(std::size_t cell, std::size_t j, Action a) const {
    return terms_[(cell * panel_.size() + j) * 2 + (a == Action::Ad ? 0 : 1)];
  }

  StateGrid grid_;
  QueryPanel panel_;
  UserType user_;
  double beta_ = 0.0;
  double subscribed_flow_ = 0.0;
  double reward_bound_ = 0.0;
  std::vector<Term> terms_;
};

ValueTable bellman_apply(const DecisionModel& model, const QueryPanel& panel, const ValueTable& v);

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 10000;
};

/// Iterates from `initial_table` until the sup-norm step is <= tol. The
/// returned table is within tol * beta / (1 - beta) of the fixed point.
/// Throws ConvergenceError (carrying the residual) when max_iter is reached.
ValueTable value_iterate(const BellmanOperator& op, const SolveOptions& options = {});
ValueTable value_iterate(const DecisionModel& model, const QueryPanel& panel,
                         const SolveOptions& options = {});

/// V^(T): `horizon` applications starting from `initial_table`.
ValueTable truncated_values(const BellmanOperator& op, int horizon);

/// Value of a fixed decision rule (indexed like BellmanOperator::apply_policy).
ValueTable policy_evaluate(const BellmanOperator& op, std::span<const Action> decisions,
                           const SolveOptions& options = {});

/// Action values, edge and its short/long-term split at an arbitrary decision
/// point. Throws std::invalid_argument for a subscribed state.
EdgeReport q_edge(const DecisionModel& model, const ValueTable& v, const UserState& state,
                  const QueryDraw& query);

/// Ad iff delta >= 0.
Action optimal_action(const EdgeReport& edge);

// ---------------------------------------------------------------------------
// Finite-horizon diagnostics

struct HorizonRow {
  int horizon = 0;
  double value_gap = 0.0;    // ||V_inf - V^(T)||
  double value_bound = 0.0;  // R_max beta^T / (1 - beta)
  double edge_gap = 0.0;     // sup |D_inf - D^(T)| over sampled decision points
  double band = 0.0;         // 2 beta R_max beta^(T-1) / (1 - beta)
  std::size_t points = 0;
  std::size_t outside_band = 0;  // points with |D_inf| > band
  std::size_t agreements = 0;    // of those, points where the actions coincide
  bool vacuous = false;          // band >= every sampled |D_inf|
  bool ok = true;
  std::string witness;
};

struct HorizonReport {
  double r_max = 0.0;
  std::vector<HorizonRow> rows;
  bool ok() const;
};

/// Checks the geometric value bound and the indifference-band policy
/// agreement for every horizon against a converged `reference` table.
HorizonReport horizon_bound_check(const BellmanOperator& op, const ValueTable& reference,
                                  std::span<const int> horizons, double reference_tol);

// ---------------------------------------------------------------------------
// Brute-force oracle (independent of the tabular solver)

/// Best expected discounted payoff over `horizon` decisions starting at
/// `start`, by explicit enumeration of query, action, engagement and
/// retention branches. Conversion books the closed-form subscribed value.
/// Refuses instances with more than 16 grid cells, more than 3 queries or a
/// horizon above 4.
double brute_force_oracle(const MarketParams& params, const UserType& user,
                          const QueryPanel& queries, int horizon, const UserState& start);

/// Same enumeration under a fixed decision rule `rule(state, query_index)`.
using DecisionRule = std::function<Action(const UserState& state, std::size_t query_index)>;
double brute_force_policy_value(const MarketParams& params, const UserType& user,
                                const QueryPanel& queries, int horizon, const UserState& start,
                                const DecisionRule& rule);

// ---------------------------------------------------------------------------
// CSV export

struct EdgeRow {
  UserState state;
  QueryDraw query;
  EdgeReport edge;
};

void write_value_table_csv(std::ostream& os, const ValueTable& v);
void write_edges_csv(std::ostream& os, std::span<const EdgeRow> rows);

}  // namespace gemdp
