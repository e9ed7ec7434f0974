#include "gemdp/dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gemdp/csv.hpp"
#include "gemdp/errors.hpp"

namespace gemdp {

StateGrid::StateGrid(int s_max, int c_max) : s_max_(s_max), c_max_(c_max) {
  if (s_max < 0 || c_max < 0) throw std::invalid_argument("StateGrid: negative cap");
}

UserState StateGrid::state(std::size_t idx) const {
  UserState st;
  st.s = static_cast<int>(idx / static_cast<std::size_t>(c_max_ + 1));
  st.c = static_cast<int>(idx % static_cast<std::size_t>(c_max_ + 1));
  return st;
}

QueryPanel::QueryPanel(std::vector<QueryDraw> draws, std::vector<double> weights)
    : draws_(std::move(draws)), weights_(std::move(weights)) {
  if (draws_.empty()) throw std::invalid_argument("QueryPanel: no draws");
  if (draws_.size() != weights_.size()) throw std::invalid_argument("QueryPanel: size mismatch");
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw std::invalid_argument("QueryPanel: bad weight");
    total += w;
  }
  if (!(total > 0.0)) throw std::invalid_argument("QueryPanel: weights sum to zero");
  for (double& w : weights_) w /= total;
}

QueryPanel QueryPanel::uniform(std::vector<QueryDraw> draws) {
  std::vector<double> w(draws.size(), 1.0);
  return QueryPanel(std::move(draws), std::move(w));
}

QueryPanel QueryPanel::monte_carlo(const PopulationSpec& population, int n, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("QueryPanel: n must be >= 1");
  std::vector<QueryDraw> draws;
  draws.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const auto idx = static_cast<std::uint64_t>(j);
    draws.push_back({sample(population.r, {seed, 0, 0, Purpose::Panel, 2 * idx}),
                     sample(population.psi, {seed, 0, 0, Purpose::Panel, 2 * idx + 1})});
  }
  return uniform(std::move(draws));
}

QueryPanel QueryPanel::for_market(const MarketParams& params, const PopulationSpec& population) {
  return monte_carlo(population, params.n_q, params.panel_seed);
}

TrueModel::TrueModel(MarketParams params, UserType user)
    : params_(std::move(params)), user_(user) {}

ActionTerms TrueModel::terms(const UserState& state, const QueryDraw& query, Action action) const {
  ActionTerms t;
  t.engage = engage_prob(params_, user_, query, state, action);
  t.flow = t.engage * flow_payoff(params_, user_, query, state, action, true) +
           (1.0 - t.engage) * flow_payoff(params_, user_, query, state, action, false);
  for (int y = 0; y < 2; ++y) {
    t.post[y] = conversion_update(params_, user_, transition(params_, query, state, action, y == 1));
    t.retention[y] = retention_prob(params_, t.post[y]);
  }
  return t;
}

double ValueTable::sup_norm() const {
  double m = std::abs(v_sub);
  for (double v : values) m = std::max(m, std::abs(v));
  return m;
}

double sup_distance(const ValueTable& a, const ValueTable& b) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("sup_distance: grid mismatch");
  double m = std::abs(a.v_sub - b.v_sub);
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    m = std::max(m, std::abs(a.values[i] - b.values[i]));
  }
  return m;
}

double subscribed_value(const MarketParams& params) {
  if (!(params.beta > 0.0 && params.beta < 1.0)) {
    throw ConfigError("market.beta", "must lie in (0, 1)");
  }
  return params.subscription_margin() / (1.0 - params.beta);
}

ValueTable initial_table(const DecisionModel& model) {
  ValueTable v;
  v.grid = model.grid();
  v.values.assign(v.grid.size(), 0.0);
  v.v_sub = model.subscribed_value();
  v.user = model.user();
  return v;
}

// ---------------------------------------------------------------------------

BellmanOperator::BellmanOperator(const DecisionModel& model, QueryPanel panel)
    : grid_(model.grid()),
      panel_(std::move(panel)),
      user_(model.user()),
      beta_(model.beta()),
      subscribed_flow_(model.subscribed_flow()) {
  if (!(beta_ > 0.0 && beta_ < 1.0)) throw ConfigError("market.beta", "must lie in (0, 1)");
  if (panel_.size() == 0) throw std::invalid_argument("BellmanOperator: empty query panel");
  reward_bound_ = std::abs(subscribed_flow_);
  terms_.resize(grid_.size() * panel_.size() * 2);
  for (std::size_t cell = 0; cell < grid_.size(); ++cell) {
    const UserState state = grid_.state(cell);
    for (std::size_t j = 0; j < panel_.size(); ++j) {
      for (Action a : {Action::Ad, Action::Free}) {
        const ActionTerms at = model.terms(state, panel_.draw(j), a);
        Term& t = terms_[(cell * panel_.size() + j) * 2 + (a == Action::Ad ? 0 : 1)];
        t.flow = at.flow;
        reward_bound_ = std::max(reward_bound_, std::abs(at.flow));
        const std::array<double, 2> prob{1.0 - at.engage, at.engage};
        for (int y = 0; y < 2; ++y) {
          t.weight[y] = prob[y] * at.retention[y];
          t.target[y] = at.post[y].subscribed
                            ? -1
                            : static_cast<std::int32_t>(grid_.index(at.post[y].s, at.post[y].c));
        }
      }
    }
  }
}

double BellmanOperator::continuation(const Term& t, const ValueTable& v) const {
  double w = 0.0;
  for (int y = 0; y < 2; ++y) {
    const double next = t.target[y] < 0 ? v.v_sub : v.values[static_cast<std::size_t>(t.target[y])];
    w += t.weight[y] * next;
  }
  return w;
}

std::array<double, 2> BellmanOperator::action_values(std::size_t cell, std::size_t j,
                                                     const ValueTable& v) const {
  const Term& ad = term(cell, j, Action::Ad);
  const Term& fr = term(cell, j, Action::Free);
  return {ad.flow + beta_ * continuation(ad, v), fr.flow + beta_ * continuation(fr, v)};
}

ValueTable BellmanOperator::apply(const ValueTable& v) const {
  if (!(v.grid == grid_)) throw std::invalid_argument("BellmanOperator::apply: grid mismatch");
  ValueTable out;
  out.grid = grid_;
  out.user = user_;
  out.values.assign(grid_.size(), 0.0);
  for (std::size_t cell = 0; cell < grid_.size(); ++cell) {
    double acc = 0.0;
    for (std::size_t j = 0; j < panel_.size(); ++j) {
      const auto q = action_values(cell, j, v);
      acc += panel_.weight(j) * std::max(q[0], q[1]);
    }
    out.values[cell] = acc;
  }
  out.v_sub = subscribed_flow_ + beta_ * v.v_sub;
  return out;
}

ValueTable BellmanOperator::apply_policy(const ValueTable& v,
                                         std::span<const Action> decisions) const {
  if (decisions.size() != grid_.size() * panel_.size()) {
    throw std::invalid_argument("apply_policy: decision table has the wrong size");
  }
  ValueTable out;
  out.grid = grid_;
  out.user = user_;
  out.values.assign(grid_.size(), 0.0);
  for (std::size_t cell = 0; cell < grid_.size(); ++cell) {
    double acc = 0.0;
    for (std::size_t j = 0; j < panel_.size(); ++j) {
      const Term& t = term(cell, j, decisions[cell * panel_.size() + j]);
      acc += panel_.weight(j) * (t.flow + beta_ * continuation(t, v));
    }
    out.values[cell] = acc;
  }
  out.v_sub = subscribed_flow_ + beta_ * v.v_sub;
  return out;
}

std::vector<Action> BellmanOperator::greedy_decisions(const ValueTable& v) const {
  std::vector<Action> out(grid_.size() * panel_.size());
  for (std::size_t cell = 0; cell < grid_.size(); ++cell) {
    for (std::size_t j = 0; j < panel_.size(); ++j) {
      const auto q = action_values(cell, j, v);
      out[cell * panel_.size() + j] = q[0] - q[1] >= 0.0 ? Action::Ad : Action::Free;
    }
  }
  return out;
}

ValueTable bellman_apply(const DecisionModel& model, const QueryPanel& panel, const ValueTable& v) {
  return BellmanOperator(model, panel).apply(v);
}

namespace {

ValueTable start_table(const BellmanOperator& op) {
  ValueTable v;
  v.grid = op.grid();
  v.user = op.user();
  v.values.assign(op.grid().size(), 0.0);
  v.v_sub = op.subscribed_flow() / (1.0 - op.beta());
  return v;
}

template <typename Step>
ValueTable iterate_to_tolerance(const BellmanOperator& op, const SolveOptions& options, Step step,
                                const char* what) {
  if (!(options.tol > 0.0)) throw std::invalid_argument(std::string(what) + ": tol must be > 0");
  if (options.max_iter < 1) throw std::invalid_argument(std::string(what) + ": max_iter < 1");
  ValueTable v = start_table(op);
  double residual = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= options.max_iter; ++k) {
    ValueTable next = step(v);
    residual = sup_distance(next, v);
    next.iterations = k;
    next.final_residual = residual;
    v = std::move(next);
    if (residual <= options.tol) return v;
  }
  std::ostringstream os;
  os << what << ": no convergence after " << options.max_iter << " iterations (residual "
     << residual << ", tol " << options.tol << ")";
  throw ConvergenceError(os.str(), residual, options.max_iter);
}

}  // namespace

ValueTable value_iterate(const BellmanOperator& op, const SolveOptions& options) {
  return iterate_to_tolerance(op, options, [&](const ValueTable& v) { return op.apply(v); },
                              "value_iterate");
}

ValueTable value_iterate(const DecisionModel& model, const QueryPanel& panel,
                         const SolveOptions& options) {
  return value_iterate(BellmanOperator(model, panel), options);
}

ValueTable truncated_values(const BellmanOperator& op, int horizon) {
  if (horizon < 0) throw std::invalid_argument("truncated_values: negative horizon");
  ValueTable v = start_table(op);
  for (int k = 1; k <= horizon; ++k) {
    ValueTable next = op.apply(v);
    next.final_residual = sup_distance(next, v);
    next.iterations = k;
    v = std::move(next);
  }
  return v;
}

ValueTable policy_evaluate(const BellmanOperator& op, std::span<const Action> decisions,
                           const SolveOptions& options) {
  return iterate_to_tolerance(
      op, options, [&](const ValueTable& v) { return op.apply_policy(v, decisions); },
      "policy_evaluate");
}

EdgeReport q_edge(const DecisionModel& model, const ValueTable& v, const UserState& state,
                  const QueryDraw& query) {
  if (state.subscribed) {
    throw std::invalid_argument("q_edge: subscribed users have no display decision");
  }
  const double beta = model.beta();
  std::array<double, 2> flow{};
  std::array<double, 2> cont{};
  for (Action a : {Action::Ad, Action::Free}) {
    const ActionTerms t = model.terms(state, query, a);
    const int i = a == Action::Ad ? 0 : 1;
    flow[i] = t.flow;
    cont[i] = (1.0 - t.engage) * t.retention[0] * v.continuation(t.post[0]) +
              t.engage * t.retention[1] * v.continuation(t.post[1]);
  }
  EdgeReport e;
  e.q_ad = flow[0] + beta * cont[0];
  e.q_free = flow[1] + beta * cont[1];
  e.delta = e.q_ad - e.q_free;
  e.short_term = flow[0] - flow[1];
  e.long_term = beta * (cont[0] - cont[1]);
  return e;
}

Action optimal_action(const EdgeReport& edge) {
  return edge.delta >= 0.0 ? Action::Ad : Action::Free;
}

// ---------------------------------------------------------------------------

bool HorizonReport::ok() const {
  return std::all_of(rows.begin(), rows.end(), [](const HorizonRow& r) { return r.ok; });
}

HorizonReport horizon_bound_check(const BellmanOperator& op, const ValueTable& reference,
                                  std::span<const int> horizons, double reference_tol) {
  if (!(reference_tol > 0.0 && reference_tol <= 1e-10)) {
    throw std::invalid_argument("horizon_bound_check: reference must be solved to tol <= 1e-10");
  }
  const double beta = op.beta();
  HorizonReport report;
  report.r_max = op.reward_bound();
  // The reference is itself only within this distance of the true fixed point.
  const double slack = 2.0 * reference_tol * beta / (1.0 - beta) + 1e-12;
  const std::size_t nq = op.panel().size();

  for (int horizon : horizons) {
    if (horizon < 1) throw std::invalid_argument("horizon_bound_check: horizons must be >= 1");
    HorizonRow row;
    row.horizon = horizon;
    const ValueTable vt = truncated_values(op, horizon);
    const ValueTable prev = truncated_values(op, horizon - 1);
    row.value_gap = sup_distance(vt, reference);
    row.value_bound = report.r_max * std::pow(beta, horizon) / (1.0 - beta);
    row.band = 2.0 * beta * report.r_max * std::pow(beta, horizon - 1) / (1.0 - beta);
    if (row.value_gap > row.value_bound + slack) {
      row.ok = false;
      std::ostringstream os;
      os << "value gap " << row.value_gap << " exceeds bound " << row.value_bound;
      row.witness = os.str();
    }
    double max_abs_edge = 0.0;
    for (std::size_t cell = 0; cell < op.grid().size(); ++cell) {
      for (std::size_t j = 0; j < nq; ++j) {
        const auto q_inf = op.action_values(cell, j, reference);
        const auto q_t = op.action_values(cell, j, prev);
        const double d_inf = q_inf[0] - q_inf[1];
        const double d_t = q_t[0] - q_t[1];
        ++row.points;
        max_abs_edge = std::max(max_abs_edge, std::abs(d_inf));
        const double gap = std::abs(d_inf - d_t);
        row.edge_gap = std::max(row.edge_gap, gap);
        if (gap > row.band + slack && row.ok) {
          row.ok = false;
          const UserState st = op.grid().state(cell);
          std::ostringstream os;
          os << "edge gap " << gap << " exceeds band " << row.band << " at s=" << st.s
             << " c=" << st.c << " query " << j;
          row.witness = os.str();
        }
        if (std::abs(d_inf) > row.band + slack) {
          ++row.outside_band;
          const bool same = (d_inf >= 0.0) == (d_t >= 0.0);
          if (same) {
            ++row.agreements;
          } else if (row.ok) {
            row.ok = false;
            const UserState st = op.grid().state(cell);
            std::ostringstream os;
            os << "action flip outside the band at s=" << st.s << " c=" << st.c << " query " << j;
            row.witness = os.str();
          }
        }
      }
    }
    row.vacuous = row.band >= max_abs_edge;
    report.rows.push_back(std::move(row));
  }
  return report;
}

// ---------------------------------------------------------------------------

void write_value_table_csv(std::ostream& os, const ValueTable& v) {
  CsvWriter csv(os, {"s", "c", "value"});
  for (int s = 0; s <= v.grid.s_max(); ++s) {
    for (int c = 0; c <= v.grid.c_max(); ++c) {
      csv.row(s, c, v.at(s, c));
    }
  }
}

void write_edges_csv(std::ostream& os, std::span<const EdgeRow> rows) {
  CsvWriter csv(os, {"s", "c", "r", "psi", "q_ad", "q_free", "delta", "short", "long"});
  for (const EdgeRow& r : rows) {
    csv.row(r.state.s, r.state.c, r.query.r, r.query.psi, r.edge.q_ad, r.edge.q_free, r.edge.delta,
            r.edge.short_term, r.edge.long_term);
  }
}

}  // namespace gemdp
