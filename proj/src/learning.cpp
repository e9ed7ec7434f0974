#include "gemdp/learning.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gemdp/csv.hpp"
#include "gemdp/errors.hpp"
#include "gemdp/parallel.hpp"

namespace gemdp {

namespace {

int slot(double x, int n) {
  const int k = static_cast<int>(std::floor(x * n));
  return std::clamp(k, 0, n - 1);
}

std::size_t action_slot(Action a) { return a == Action::Ad ? 0 : 1; }

std::vector<UserState> open_cells(const MarketParams& market, const UserType& user) {
  std::vector<UserState> cells;
  const StateGrid grid(market.grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const UserState st = grid.state(i);
    if (!conversion_update(market, user, st).subscribed) cells.push_back(st);
  }
  return cells;
}

std::string bin_label(const Binning& b, std::size_t bin) {
  const auto k = b.coords(bin);
  std::ostringstream os;
  os << "bin (gamma " << k[0] << ", theta " << k[1] << ", r " << k[2] << ", psi " << k[3] << ")";
  return os.str();
}

}  // namespace

void LogDesign::validate() const {
  market.validate();
  population.validate();
  if (fixed_user) fixed_user->validate();
  // Both actions keep propensity >= eta only when eta <= 1/2.
  if (!(eta > 0.0 && eta <= 0.5)) throw ConfigError("learning.eta", "must lie in (0, 0.5]");
}

std::vector<LogRecord> generate_logs(const LogDesign& design, std::size_t n_records,
                                     std::uint64_t seed, int threads) {
  design.validate();
  std::vector<UserState> fixed_cells;
  if (design.fixed_user) {
    fixed_cells = open_cells(design.market, *design.fixed_user);
    if (fixed_cells.empty()) {
      throw std::invalid_argument("generate_logs: the fixed user converts in every grid cell");
    }
  }
  std::vector<double> cumulative;
  if (design.query_panel) {
    double acc = 0.0;
    for (std::size_t j = 0; j < design.query_panel->size(); ++j) {
      acc += design.query_panel->weight(j);
      cumulative.push_back(acc);
    }
  }

  std::vector<LogRecord> logs(n_records);
  parallel_for(n_records, threads, [&](std::size_t i) {
    const auto id = static_cast<std::uint64_t>(i);
    const auto& m = design.market;
    LogRecord rec;
    rec.user_id = id;
    rec.user = design.fixed_user ? *design.fixed_user : sample_user(design.population, seed, id);

    std::vector<UserState> own;
    const std::vector<UserState>* cells = &fixed_cells;
    if (!design.fixed_user) {
      own = open_cells(m, rec.user);
      cells = &own;
    }
    if (cells->empty()) {
      // A user who has converted everywhere contributes a subscribed return only.
      rec.state = {m.grid.s_max, 0, false, true};
    } else {
      const double u = uniform01({seed, id, 0, Purpose::LogState, 0});
      rec.state = (*cells)[std::min(cells->size() - 1,
                                    static_cast<std::size_t>(u * static_cast<double>(cells->size())))];
    }

    if (design.query_panel) {
      const double u = uniform01({seed, id, 0, Purpose::LogQuery, 0}) * cumulative.back();
      const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), u);
      const auto j = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()),
                                           cumulative.size() - 1);
      rec.query = design.query_panel->draw(j);
    } else {
      rec.query = {sample(design.population.r, {seed, id, 0, Purpose::LogQuery, 0}),
                   sample(design.population.psi, {seed, id, 0, Purpose::LogQuery, 1})};
    }

    rec.action = uniform01({seed, id, 0, Purpose::LogAction, 0}) < design.eta ? Action::Free
                                                                            : Action::Ad;
    const double p = engage_prob(m, rec.user, rec.query, rec.state, rec.action);
    rec.engaged = uniform01({seed, id, 0, Purpose::LogEngage, 0}) < p;
    rec.payoff = flow_payoff(m, rec.user, rec.query, rec.state, rec.action, rec.engaged);
    rec.next = conversion_update(
        m, rec.user, transition(m, rec.query, rec.state, rec.action, rec.engaged));
    rec.returned = uniform01({seed, id, 0, Purpose::LogReturn, 0}) < retention_prob(m, rec.next);
    rec.next.active = rec.returned;
    logs[i] = rec;
  });
  return logs;
}

void write_logs_csv(std::ostream& os, std::span<const LogRecord> logs) {
  CsvWriter w(os, {"user_id", "gamma", "theta", "r", "psi", "s", "c", "action", "engaged", "payoff",
                   "next_s", "next_c", "next_z", "returned"});
  for (const auto& r : logs) {
    w.row(r.user_id, r.user.gamma, r.user.theta, r.query.r, r.query.psi, r.state.s, r.state.c,
          to_string(r.action), r.engaged, r.payoff, r.next.s, r.next.c, r.next.subscribed,
          r.returned);
  }
}

std::vector<LogRecord> read_logs_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  const auto col = [&](std::string_view n) { return t.column(n); };
  const std::size_t c_id = col("user_id"), c_g = col("gamma"), c_t = col("theta"), c_r = col("r"),
                    c_p = col("psi"), c_s = col("s"), c_c = col("c"), c_a = col("action"),
                    c_e = col("engaged"), c_pay = col("payoff"), c_ns = col("next_s"),
                    c_nc = col("next_c"), c_nz = col("next_z"), c_ret = col("returned");
  std::vector<LogRecord> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    LogRecord r;
    r.user_id = static_cast<std::uint64_t>(parse_int(row[c_id]));
    r.user = {parse_real(row[c_g]), parse_real(row[c_t])};
    r.query = {parse_real(row[c_r]), parse_real(row[c_p])};
    r.state = {static_cast<int>(parse_int(row[c_s])), static_cast<int>(parse_int(row[c_c])), false,
               true};
    if (row[c_a] == "ad") {
      r.action = Action::Ad;
    } else if (row[c_a] == "free") {
      r.action = Action::Free;
    } else {
      throw std::runtime_error("read_logs_csv: unknown action \"" + row[c_a] + "\"");
    }
    r.engaged = parse_int(row[c_e]) != 0;
    r.payoff = parse_real(row[c_pay]);
    r.returned = parse_int(row[c_ret]) != 0;
    r.next = {static_cast<int>(parse_int(row[c_ns])), static_cast<int>(parse_int(row[c_nc])),
              parse_int(row[c_nz]) != 0, r.returned};
    out.push_back(r);
  }
  return out;
}

// ---------------------------------------------------------------------------

void Binning::validate() const {
  for (auto [n, key] : {std::pair{gamma_bins, "learning.gamma_bins"},
                        {theta_bins, "learning.theta_bins"},
                        {r_bins, "learning.r_bins"},
                        {psi_bins, "learning.psi_bins"}}) {
    if (n < 1 || n > 64) throw ConfigError(key, "must lie in [1, 64]");
  }
}

std::size_t Binning::size() const {
  return static_cast<std::size_t>(gamma_bins) * static_cast<std::size_t>(theta_bins) *
         static_cast<std::size_t>(r_bins) * static_cast<std::size_t>(psi_bins);
}

std::size_t Binning::index(const UserType& user, const QueryDraw& query) const {
  std::size_t k = static_cast<std::size_t>(slot(user.gamma, gamma_bins));
  k = k * static_cast<std::size_t>(theta_bins) + static_cast<std::size_t>(slot(user.theta, theta_bins));
  k = k * static_cast<std::size_t>(r_bins) + static_cast<std::size_t>(slot(query.r, r_bins));
  k = k * static_cast<std::size_t>(psi_bins) + static_cast<std::size_t>(slot(query.psi, psi_bins));
  return k;
}

std::array<int, 4> Binning::coords(std::size_t index) const {
  std::array<int, 4> k{};
  k[3] = static_cast<int>(index % static_cast<std::size_t>(psi_bins));
  index /= static_cast<std::size_t>(psi_bins);
  k[2] = static_cast<int>(index % static_cast<std::size_t>(r_bins));
  index /= static_cast<std::size_t>(r_bins);
  k[1] = static_cast<int>(index % static_cast<std::size_t>(theta_bins));
  k[0] = static_cast<int>(index / static_cast<std::size_t>(theta_bins));
  return k;
}

double EstimatedPrimitives::retention_at(const UserState& st) const {
  if (st.s < 0 || st.c < 0 || st.s > grid.s_max || st.c > grid.c_max) {
    throw std::out_of_range("EstimatedPrimitives: state outside the retention table");
  }
  return retention[retention_index(st.s, st.c, st.subscribed)];
}

EstimatedPrimitives estimate_primitives(std::span<const LogRecord> logs, const Binning& binning,
                                        const GridCaps& grid, const MarketParams* truth) {
  binning.validate();
  if (logs.empty()) throw std::invalid_argument("estimate_primitives: no records");
  EstimatedPrimitives est;
  est.binning = binning;
  est.grid = grid;
  const std::size_t nb = binning.size();
  const std::size_t nr = static_cast<std::size_t>(grid.s_max + 1) *
                         static_cast<std::size_t>(grid.c_max + 1) * 2;
  std::array<std::vector<double>, 2> engaged_sum, payoff_sum;
  for (std::size_t a = 0; a < 2; ++a) {
    engaged_sum[a].assign(nb, 0.0);
    payoff_sum[a].assign(nb, 0.0);
    est.count[a].assign(nb, 0);
  }
  std::vector<double> return_sum(nr, 0.0);
  est.retention_count.assign(nr, 0);
  std::array<double, 2> pooled_sum{};
  std::array<std::size_t, 2> pooled_count{};

  // Sums of 0/1 outcomes and payoffs are order-free up to rounding; counts are exact.
  for (const auto& r : logs) {
    if (r.next.s < 0 || r.next.c < 0 || r.next.s > grid.s_max || r.next.c > grid.c_max) {
      throw std::invalid_argument("estimate_primitives: record state outside the grid");
    }
    const std::size_t bin = binning.index(r.user, r.query);
    const std::size_t a = action_slot(r.action);
    engaged_sum[a][bin] += r.engaged ? 1.0 : 0.0;
    payoff_sum[a][bin] += r.payoff;
    ++est.count[a][bin];
    const std::size_t k = est.retention_index(r.next.s, r.next.c, r.next.subscribed);
    return_sum[k] += r.returned ? 1.0 : 0.0;
    ++est.retention_count[k];
    const std::size_t z = r.next.subscribed ? 1 : 0;
    pooled_sum[z] += r.returned ? 1.0 : 0.0;
    ++pooled_count[z];
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t bin = 0; bin < nb; ++bin) {
    if (!est.occupied(bin)) {
      for (std::size_t a = 0; a < 2; ++a) {
        est.engage[a].push_back(nan);
        est.reward[a].push_back(nan);
      }
      continue;
    }
    for (std::size_t a = 0; a < 2; ++a) {
      if (est.count[a][bin] == 0) {
        throw std::invalid_argument("estimate_primitives: " + bin_label(binning, bin) +
                                    " has no " + std::string(to_string(a == 0 ? Action::Ad : Action::Free)) +
                                    " records");
      }
      const auto n = static_cast<double>(est.count[a][bin]);
      est.engage[a].push_back(engaged_sum[a][bin] / n);
      est.reward[a].push_back(payoff_sum[a][bin] / n);
    }
  }

  const double overall = (pooled_sum[0] + pooled_sum[1]) /
                         static_cast<double>(pooled_count[0] + pooled_count[1]);
  est.retention.resize(nr);
  est.retention_pooled.assign(nr, 0);
  for (std::size_t k = 0; k < nr; ++k) {
    if (est.retention_count[k] > 0) {
      est.retention[k] = return_sum[k] / static_cast<double>(est.retention_count[k]);
      continue;
    }
    const std::size_t z = k % 2;
    est.retention[k] = pooled_count[z] > 0
                           ? pooled_sum[z] / static_cast<double>(pooled_count[z])
                           : overall;
    est.retention_pooled[k] = 1;
  }

  if (truth != nullptr) {
    EstimationErrors e;
    std::array<std::vector<double>, 2> lo_m, hi_m, lo_r, hi_r;
    for (std::size_t a = 0; a < 2; ++a) {
      lo_m[a].assign(nb, std::numeric_limits<double>::infinity());
      hi_m[a].assign(nb, -std::numeric_limits<double>::infinity());
      lo_r[a] = lo_m[a];
      hi_r[a] = hi_m[a];
    }
    for (const auto& r : logs) {
      const std::size_t bin = binning.index(r.user, r.query);
      for (Action act : {Action::Ad, Action::Free}) {
        const std::size_t a = action_slot(act);
        const double m = engage_prob(*truth, r.user, r.query, r.state, act);
        const double f = expected_flow(*truth, r.user, r.query, r.state, act);
        e.eps_m = std::max(e.eps_m, std::abs(est.engage[a][bin] - m));
        e.eps_r = std::max(e.eps_r, std::abs(est.reward[a][bin] - f));
        lo_m[a][bin] = std::min(lo_m[a][bin], m);
        hi_m[a][bin] = std::max(hi_m[a][bin], m);
        lo_r[a][bin] = std::min(lo_r[a][bin], f);
        hi_r[a][bin] = std::max(hi_r[a][bin], f);
      }
    }
    for (std::size_t a = 0; a < 2; ++a) {
      for (std::size_t bin = 0; bin < nb; ++bin) {
        if (!est.occupied(bin)) continue;
        if (hi_m[a][bin] - lo_m[a][bin] > 1e-12 || hi_r[a][bin] - lo_r[a][bin] > 1e-12) {
          e.approximate = true;
        }
      }
    }
    for (int s = 0; s <= grid.s_max; ++s) {
      for (int c = 0; c <= grid.c_max; ++c) {
        for (bool z : {false, true}) {
          const std::size_t k = est.retention_index(s, c, z);
          if (est.retention_count[k] == 0) continue;
          const double rho = retention_prob(*truth, {s, c, z, true});
          e.eps_rho = std::max(e.eps_rho, std::abs(est.retention[k] - rho));
        }
      }
    }
    est.errors = e;
  }
  return est;
}

void write_estimates_csv(std::ostream& os, const EstimatedPrimitives& est) {
  CsvWriter w(os, {"table", "action", "gamma_bin", "theta_bin", "r_bin", "psi_bin", "s", "c", "z",
                   "estimate", "count", "pooled"});
  const std::string blank;
  for (const char* table : {"engage", "reward"}) {
    const bool engage = std::string_view(table) == "engage";
    for (Action act : {Action::Ad, Action::Free}) {
      const std::size_t a = action_slot(act);
      for (std::size_t bin = 0; bin < est.binning.size(); ++bin) {
        const auto k = est.binning.coords(bin);
        w.row(table, to_string(act), k[0], k[1], k[2], k[3], blank, blank, blank,
              engage ? est.engage[a][bin] : est.reward[a][bin], est.count[a][bin], blank);
      }
    }
  }
  for (int s = 0; s <= est.grid.s_max; ++s) {
    for (int c = 0; c <= est.grid.c_max; ++c) {
      for (bool z : {false, true}) {
        const std::size_t k = est.retention_index(s, c, z);
        w.row("retention", blank, blank, blank, blank, blank, s, c, z, est.retention[k],
              est.retention_count[k], est.retention_pooled[k] != 0);
      }
    }
  }
}

EstimatedPrimitives read_estimates_csv(std::istream& is) {
  const CsvTable t = read_csv(is);
  const std::size_t c_table = t.column("table"), c_action = t.column("action"),
                    c_gb = t.column("gamma_bin"), c_tb = t.column("theta_bin"),
                    c_rb = t.column("r_bin"), c_pb = t.column("psi_bin"), c_s = t.column("s"),
                    c_c = t.column("c"), c_z = t.column("z"), c_est = t.column("estimate"),
                    c_n = t.column("count"), c_pool = t.column("pooled");
  EstimatedPrimitives est;
  est.binning = {0, 0, 0, 0};
  est.grid = {0, 0};
  for (const auto& row : t.rows) {
    if (row[c_table] == "retention") {
      est.grid.s_max = std::max(est.grid.s_max, static_cast<int>(parse_int(row[c_s])));
      est.grid.c_max = std::max(est.grid.c_max, static_cast<int>(parse_int(row[c_c])));
    } else {
      est.binning.gamma_bins = std::max(est.binning.gamma_bins, static_cast<int>(parse_int(row[c_gb])) + 1);
      est.binning.theta_bins = std::max(est.binning.theta_bins, static_cast<int>(parse_int(row[c_tb])) + 1);
      est.binning.r_bins = std::max(est.binning.r_bins, static_cast<int>(parse_int(row[c_rb])) + 1);
      est.binning.psi_bins = std::max(est.binning.psi_bins, static_cast<int>(parse_int(row[c_pb])) + 1);
    }
  }
  est.binning.validate();
  const std::size_t nb = est.binning.size();
  const std::size_t nr = static_cast<std::size_t>(est.grid.s_max + 1) *
                         static_cast<std::size_t>(est.grid.c_max + 1) * 2;
  for (std::size_t a = 0; a < 2; ++a) {
    est.engage[a].assign(nb, std::numeric_limits<double>::quiet_NaN());
    est.reward[a].assign(nb, std::numeric_limits<double>::quiet_NaN());
    est.count[a].assign(nb, 0);
  }
  est.retention.assign(nr, std::numeric_limits<double>::quiet_NaN());
  est.retention_count.assign(nr, 0);
  est.retention_pooled.assign(nr, 0);
  for (const auto& row : t.rows) {
    const double value = parse_real(row[c_est]);
    const auto n = static_cast<std::size_t>(parse_int(row[c_n]));
    if (row[c_table] == "retention") {
      const std::size_t k = est.retention_index(static_cast<int>(parse_int(row[c_s])),
                                                static_cast<int>(parse_int(row[c_c])),
                                                parse_int(row[c_z]) != 0);
      est.retention[k] = value;
      est.retention_count[k] = n;
      est.retention_pooled[k] = parse_int(row[c_pool]) != 0 ? 1 : 0;
      continue;
    }
    const std::size_t a = row[c_action] == "ad" ? 0 : 1;
    const UserType user{Binning::center(static_cast<int>(parse_int(row[c_gb])), est.binning.gamma_bins),
                        Binning::center(static_cast<int>(parse_int(row[c_tb])), est.binning.theta_bins)};
    const QueryDraw query{Binning::center(static_cast<int>(parse_int(row[c_rb])), est.binning.r_bins),
                          Binning::center(static_cast<int>(parse_int(row[c_pb])), est.binning.psi_bins)};
    const std::size_t bin = est.binning.index(user, query);
    if (row[c_table] == "engage") {
      est.engage[a][bin] = value;
    } else if (row[c_table] == "reward") {
      est.reward[a][bin] = value;
    } else {
      throw std::runtime_error("read_estimates_csv: unknown table \"" + row[c_table] + "\"");
    }
    est.count[a][bin] = n;
  }
  for (double v : est.retention) {
    if (!std::isfinite(v)) throw std::runtime_error("read_estimates_csv: missing retention rows");
  }
  return est;
}

// ---------------------------------------------------------------------------

EstimatedModel::EstimatedModel(MarketParams known, UserType user, EstimatedPrimitives estimates)
    : params_(std::move(known)), user_(user), est_(std::move(estimates)) {
  if (est_.grid.s_max != params_.grid.s_max || est_.grid.c_max != params_.grid.c_max) {
    throw std::invalid_argument("EstimatedModel: retention table does not match the market grid");
  }
}

ActionTerms EstimatedModel::terms(const UserState& state, const QueryDraw& query,
                                  Action action) const {
  const std::size_t bin = est_.binning.index(user_, query);
  if (!est_.occupied(bin)) {
    throw std::invalid_argument("EstimatedModel: " + bin_label(est_.binning, bin) +
                                " has no records");
  }
  const std::size_t a = action_slot(action);
  ActionTerms t;
  t.engage = std::clamp(est_.engage[a][bin], 0.0, 1.0);
  t.flow = est_.reward[a][bin];
  for (int y = 0; y < 2; ++y) {
    t.post[y] = conversion_update(params_, user_, transition(params_, query, state, action, y == 1));
    t.retention[y] = std::clamp(est_.retention_at(t.post[y]), 0.0, 1.0);
  }
  return t;
}

PluginSolve plugin_policy(const EstimatedModel& model, const QueryPanel& panel,
                          const SolveOptions& options) {
  const BellmanOperator op(model, panel);
  PluginSolve out;
  out.values = value_iterate(op, options);
  out.decisions = op.greedy_decisions(out.values);
  return out;
}

double learning_error_bound(double eps_r, double eps_m, double eps_rho, double beta, double v_max) {
  return eps_r + beta * (2.0 * eps_m + eps_rho) * v_max;
}

BoundsReport verify_bounds(const DecisionModel& truth, const DecisionModel& plugin,
                           const QueryPanel& panel, const SolveOptions& options) {
  if (!(options.tol <= 1e-9)) throw std::invalid_argument("verify_bounds: tol must be <= 1e-9");
  if (truth.beta() != plugin.beta() || !(truth.grid() == plugin.grid())) {
    throw std::invalid_argument("verify_bounds: models disagree on beta or the grid");
  }
  const BellmanOperator op(truth, panel);
  const BellmanOperator op_hat(plugin, panel);
  const double beta = truth.beta();
  const StateGrid grid = op.grid();

  BoundsReport rep;
  rep.r_max = op.reward_bound();
  rep.v_max = rep.r_max / (1.0 - beta);
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    const UserState st = grid.state(cell);
    for (std::size_t j = 0; j < panel.size(); ++j) {
      for (Action a : {Action::Ad, Action::Free}) {
        const ActionTerms t = truth.terms(st, panel.draw(j), a);
        const ActionTerms h = plugin.terms(st, panel.draw(j), a);
        rep.eps_m = std::max(rep.eps_m, std::abs(t.engage - std::clamp(h.engage, 0.0, 1.0)));
        rep.eps_r = std::max(rep.eps_r, std::abs(t.flow - h.flow));
        for (int y = 0; y < 2; ++y) {
          rep.eps_rho = std::max(rep.eps_rho, std::abs(t.retention[y] - h.retention[y]));
        }
      }
    }
  }
  rep.b = learning_error_bound(rep.eps_r, rep.eps_m, rep.eps_rho, beta, rep.v_max);

  const ValueTable v = value_iterate(op, options);
  const ValueTable v_hat = value_iterate(op_hat, options);
  // Each table sits within tol beta / (1 - beta) of its fixed point; the
  // edges and the evaluated policy inherit at most a few multiples of that.
  const double slack = 4.0 * options.tol / (1.0 - beta) + 1e-12;

  rep.value_gap = sup_distance(v, v_hat);
  rep.value_bound = rep.b / (1.0 - beta);
  rep.value_ok = rep.value_gap <= rep.value_bound + slack;
  if (!rep.value_ok) {
    std::ostringstream os;
    os << "value gap " << rep.value_gap << " > " << rep.value_bound << "; ";
    rep.witness += os.str();
  }

  rep.edge_bound = 2.0 * rep.b / (1.0 - beta);
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    for (std::size_t j = 0; j < panel.size(); ++j) {
      const auto q = op.action_values(cell, j, v);
      const auto qh = op_hat.action_values(cell, j, v_hat);
      const double d = q[0] - q[1];
      const double dh = qh[0] - qh[1];
      ++rep.points;
      const double gap = std::abs(d - dh);
      if (gap > rep.edge_gap) rep.edge_gap = gap;
      if (gap > rep.edge_bound + slack && rep.edge_ok) {
        rep.edge_ok = false;
        const UserState st = grid.state(cell);
        std::ostringstream os;
        os << "edge gap " << gap << " > " << rep.edge_bound << " at s=" << st.s << " c=" << st.c
           << " query " << j << "; ";
        rep.witness += os.str();
      }
      if (std::abs(d) > rep.edge_bound + slack) {
        ++rep.margin_points;
        if ((d >= 0.0) == (dh >= 0.0)) {
          ++rep.agreements;
        } else if (rep.agreement_ok) {
          rep.agreement_ok = false;
          const UserState st = grid.state(cell);
          std::ostringstream os;
          os << "actions differ with |edge| " << std::abs(d) << " outside the band at s=" << st.s
             << " c=" << st.c << " query " << j << "; ";
          rep.witness += os.str();
        }
      }
    }
  }

  const std::vector<Action> learned = op_hat.greedy_decisions(v_hat);
  const ValueTable v_learned = policy_evaluate(op, learned, options);
  rep.regret_bound = 2.0 * rep.b / ((1.0 - beta) * (1.0 - beta));
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    rep.regret = std::max(rep.regret, v.values[cell] - v_learned.values[cell]);
  }
  rep.regret = std::max(rep.regret, 0.0);
  rep.regret_ok = rep.regret <= rep.regret_bound + slack;
  if (!rep.regret_ok) {
    std::ostringstream os;
    os << "regret " << rep.regret << " > " << rep.regret_bound << "; ";
    rep.witness += os.str();
  }
  return rep;
}

// ---------------------------------------------------------------------------

LogDesign LearningSetup::design() const {
  LogDesign d;
  d.market = market;
  d.fixed_user = user;
  d.query_panel = panel;
  d.eta = eta;
  return d;
}

LearningSetup make_learning_setup(const MarketParams& market, const UserType& user, double eta,
                                  int r_bins, int psi_bins) {
  market.validate();
  user.validate();
  if (market.utility.uc_ad != 0.0) {
    throw ConfigError("learning.market.utility.uc_ad", "must be 0 so engagement ignores the state");
  }
  if (market.revenue.b_c != 0.0 || market.revenue.b_s != 0.0) {
    throw ConfigError("learning.market.revenue", "b_c and b_s must be 0 so revenue ignores the state");
  }
  LearningSetup setup;
  setup.market = market;
  setup.user = user;
  setup.eta = eta;
  setup.binning = {1, 1, r_bins, psi_bins};
  setup.binning.validate();
  std::vector<QueryDraw> centers;
  for (int i = 0; i < r_bins; ++i) {
    for (int k = 0; k < psi_bins; ++k) {
      centers.push_back({Binning::center(i, r_bins), Binning::center(k, psi_bins)});
    }
  }
  setup.panel = QueryPanel::uniform(std::move(centers));
  setup.design().validate();
  return setup;
}

std::vector<LearningRow> run_learning(const LearningSetup& setup,
                                      std::span<const std::size_t> n_records, std::uint64_t seed,
                                      const SolveOptions& options, int threads) {
  if (n_records.empty()) throw ConfigError("learning.n_records", "must not be empty");
  const std::size_t n_max = *std::max_element(n_records.begin(), n_records.end());
  // Record i is keyed by i alone, so every prefix is the log of that size.
  const std::vector<LogRecord> logs = generate_logs(setup.design(), n_max, seed, threads);
  const TrueModel truth(setup.market, setup.user);
  std::vector<LearningRow> rows(n_records.size());
  parallel_for(n_records.size(), threads, [&](std::size_t i) {
    const std::size_t n = n_records[i];
    if (n == 0) throw ConfigError("learning.n_records", "entries must be >= 1");
    const auto prefix = std::span<const LogRecord>(logs).first(n);
    EstimatedPrimitives est = estimate_primitives(prefix, setup.binning, setup.market.grid, &setup.market);
    const EstimationErrors errors = *est.errors;
    const EstimatedModel plugin(setup.market, setup.user, std::move(est));
    rows[i] = {n, errors, verify_bounds(truth, plugin, setup.panel, options)};
  });
  return rows;
}

void write_learning_csv(std::ostream& os, std::span<const LearningRow> rows) {
  CsvWriter w(os, {"n_records", "eps_m", "eps_r", "eps_rho", "b", "value_gap", "value_bound",
                   "edge_gap", "edge_bound", "regret", "regret_bound", "margin_points",
                   "agreements", "pass"});
  for (const auto& r : rows) {
    const auto& b = r.bounds;
    w.row(r.n_records, b.eps_m, b.eps_r, b.eps_rho, b.b, b.value_gap, b.value_bound, b.edge_gap,
          b.edge_bound, b.regret, b.regret_bound, b.margin_points, b.agreements, b.ok());
  }
}

}  // namespace gemdp
