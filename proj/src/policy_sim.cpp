#include "gemdp/policy_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "gemdp/csv.hpp"
#include "gemdp/errors.hpp"
#include "gemdp/parallel.hpp"

namespace gemdp {

std::string_view to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::OptimalDP: return "optimal_dp";
    case PolicyKind::OneStepGreedy: return "one_step_greedy";
    case PolicyKind::AlwaysAd: return "always_ad";
    case PolicyKind::AlwaysFree: return "always_free";
  }
  return "?";
}

PolicyKind policy_kind_from_string(std::string_view name) {
  for (PolicyKind k : {PolicyKind::OptimalDP, PolicyKind::OneStepGreedy, PolicyKind::AlwaysAd,
                       PolicyKind::AlwaysFree}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("policy", "unknown policy \"" + std::string(name) +
                                  "\" (expected optimal_dp, one_step_greedy, always_ad, always_free)");
}

// ---------------------------------------------------------------------------

TypeBinning::TypeBinning(int n_bins) : n_(n_bins) {
  if (n_bins < 1) throw ConfigError("simulation.n_bins", "must be >= 1");
}

double TypeBinning::point(int k) const {
  return n_ == 1 ? 0.5 : static_cast<double>(k) / static_cast<double>(n_ - 1);
}

int TypeBinning::nearest(double x) const {
  if (n_ == 1) return 0;
  const double scaled = std::clamp(x, 0.0, 1.0) * static_cast<double>(n_ - 1);
  return std::clamp(static_cast<int>(std::lround(scaled)), 0, n_ - 1);
}

std::size_t TypeBinning::bin(const UserType& user) const {
  return static_cast<std::size_t>(nearest(user.gamma)) * static_cast<std::size_t>(n_) +
         static_cast<std::size_t>(nearest(user.theta));
}

UserType TypeBinning::center(std::size_t bin) const {
  const auto n = static_cast<std::size_t>(n_);
  return {point(static_cast<int>(bin / n)), point(static_cast<int>(bin % n))};
}

// ---------------------------------------------------------------------------

Action Policy::decide(const UserType& user, const UserState& state, const QueryDraw& query) const {
  switch (kind_) {
    case PolicyKind::AlwaysAd: return Action::Ad;
    case PolicyKind::AlwaysFree: return Action::Free;
    case PolicyKind::OneStepGreedy:
      return optimal_action(q_edge(TrueModel(market_, user), *surrogate_, state, query));
    case PolicyKind::OptimalDP: {
      const auto& table = tables_[binning_.bin(user)];
      if (!table) throw std::logic_error("Policy: no solved table for this type bin");
      return optimal_action(q_edge(TrueModel(market_, user), *table, state, query));
    }
  }
  return Action::Ad;
}

std::size_t Policy::solved_bins() const {
  return static_cast<std::size_t>(
      std::count_if(tables_.begin(), tables_.end(), [](const auto& t) { return t.has_value(); }));
}

Policy build_policy(PolicyKind kind, const MarketParams& market, const PopulationSpec& population,
                    int n_bins, std::span<const UserType> users, const SolveOptions& options,
                    int threads) {
  market.validate();
  Policy policy(kind, market, TypeBinning(n_bins));
  if (kind == PolicyKind::OneStepGreedy) {
    ValueTable s;
    s.grid = StateGrid(market.grid);
    s.values.assign(s.grid.size(), 0.0);
    s.v_sub = subscribed_value(market);
    policy.surrogate_ = std::move(s);
  } else if (kind == PolicyKind::OptimalDP) {
    const TypeBinning& binning = policy.binning_;
    std::vector<char> used(binning.size(), 0);
    for (const UserType& u : users) used[binning.bin(u)] = 1;
    std::vector<std::size_t> bins;
    for (std::size_t b = 0; b < used.size(); ++b) {
      if (used[b]) bins.push_back(b);
    }
    const QueryPanel panel = QueryPanel::for_market(market, population);
    policy.tables_.resize(binning.size());
    parallel_for(bins.size(), threads, [&](std::size_t i) {
      const TrueModel model(market, binning.center(bins[i]));
      policy.tables_[bins[i]] = value_iterate(model, panel, options);
    });
  }
  return policy;
}

// ---------------------------------------------------------------------------

void SimConfig::validate() const {
  if (n_users < 1) throw ConfigError("simulation.n_users", "must be >= 1");
  if (horizon < 1) throw ConfigError("simulation.horizon", "must be >= 1");
  if (n_bins < 1) throw ConfigError("simulation.n_bins", "must be >= 1");
  market.validate();
  population.validate();
}

std::vector<UserType> cohort_types(const SimConfig& config, std::uint64_t seed) {
  std::vector<UserType> out(static_cast<std::size_t>(config.n_users));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = sample_user(config.population, seed, i);
  return out;
}

namespace {

std::vector<SimEvent> simulate_user(const SimConfig& cfg, const Policy& policy, std::uint64_t seed,
                                    std::uint32_t id, double v_sub) {
  const MarketParams& mk = cfg.market;
  const UserType user = sample_user(cfg.population, seed, id);
  std::vector<SimEvent> events;
  UserState state = conversion_update(mk, user, UserState{});
  if (state.subscribed) {
    events.push_back({0, id, SimEvent::Kind::Conversion, Action::Ad, v_sub});
    return events;
  }
  double discount = 1.0;  // beta^t
  for (int t = 0; t < cfg.horizon; ++t) {
    const auto period = static_cast<std::uint64_t>(t);
    const QueryDraw q = sample_query(cfg.population, seed, id, period);
    const Action a = policy.decide(user, state, q);
    const double m = engage_prob(mk, user, q, state, a);
    const bool engaged = uniform01({seed, id, period, Purpose::Engage, 0}) < m;
    events.push_back({t, id, SimEvent::Kind::Display, a,
                      discount * flow_payoff(mk, user, q, state, a, engaged)});
    const UserState next = conversion_update(mk, user, transition(mk, q, state, a, engaged));
    if (next.subscribed) {
      events.push_back({t, id, SimEvent::Kind::Conversion, a, discount * mk.beta * v_sub});
      break;
    }
    if (uniform01({seed, id, period, Purpose::Retain, 0}) >= retention_prob(mk, next)) {
      events.push_back({t, id, SimEvent::Kind::Churn, a, 0.0});
      break;
    }
    state = next;
    discount *= mk.beta;
  }
  return events;
}

}  // namespace

EventLog simulate_cohort(const SimConfig& config, const Policy& policy, std::uint64_t seed,
                         int threads) {
  config.validate();
  const double v_sub = subscribed_value(config.market);
  const auto n = static_cast<std::size_t>(config.n_users);
  std::vector<std::vector<SimEvent>> per_user(n);
  parallel_for(n, threads, [&](std::size_t i) {
    per_user[i] = simulate_user(config, policy, seed, static_cast<std::uint32_t>(i), v_sub);
  });
  EventLog log;
  log.n_users = config.n_users;
  log.horizon = config.horizon;
  log.beta = config.market.beta;
  for (auto& ev : per_user) log.events.insert(log.events.end(), ev.begin(), ev.end());
  std::stable_sort(log.events.begin(), log.events.end(), [](const SimEvent& a, const SimEvent& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.user != b.user) return a.user < b.user;
    return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  });
  return log;
}

Trajectory compute_metrics(const EventLog& log) {
  if (log.n_users < 1 || log.horizon < 1) {
    throw std::invalid_argument("compute_metrics: empty event log");
  }
  const auto T = static_cast<std::size_t>(log.horizon);
  std::vector<double> payoff(T, 0.0);
  std::vector<int> displays(T, 0), free_displays(T, 0), conversions(T, 0), churns(T, 0);
  for (const SimEvent& e : log.events) {
    if (e.t < 0 || static_cast<std::size_t>(e.t) >= T) {
      throw std::invalid_argument("compute_metrics: event outside the horizon");
    }
    const auto t = static_cast<std::size_t>(e.t);
    payoff[t] += e.payoff;
    switch (e.kind) {
      case SimEvent::Kind::Display:
        ++displays[t];
        if (e.action == Action::Free) ++free_displays[t];
        break;
      case SimEvent::Kind::Conversion: ++conversions[t]; break;
      case SimEvent::Kind::Churn: ++churns[t]; break;
    }
  }
  Trajectory tr;
  double cum = 0.0;
  int churned = 0;
  int subs = 0;
  double rate_sum = 0.0;
  int rate_count = 0;
  for (std::size_t t = 0; t < T; ++t) {
    cum += payoff[t];
    churned += churns[t];
    subs += conversions[t];
    tr.cum_payoff.push_back(cum);
    tr.active_users.push_back(static_cast<double>(log.n_users - churned));
    tr.cum_subscribers.push_back(static_cast<double>(subs));
    if (displays[t] > 0) {
      const double rate = static_cast<double>(free_displays[t]) / displays[t];
      tr.free_exposure_rate.emplace_back(rate);
      rate_sum += rate;
      ++rate_count;
    } else {
      tr.free_exposure_rate.emplace_back(std::nullopt);
    }
  }
  tr.final_payoff = cum;
  tr.final_subscribers = static_cast<double>(subs);
  if (rate_count > 0) tr.free_share = rate_sum / rate_count;
  return tr;
}

Trajectory mean_trajectory(std::span<const Trajectory> runs) {
  if (runs.empty()) throw std::invalid_argument("mean_trajectory: no runs");
  const std::size_t T = runs.front().cum_payoff.size();
  Trajectory out;
  out.cum_payoff.assign(T, 0.0);
  out.active_users.assign(T, 0.0);
  out.cum_subscribers.assign(T, 0.0);
  const double n = static_cast<double>(runs.size());
  for (std::size_t t = 0; t < T; ++t) {
    double rate = 0.0;
    int defined = 0;
    for (const Trajectory& r : runs) {
      if (r.cum_payoff.size() != T) throw std::invalid_argument("mean_trajectory: horizon mismatch");
      out.cum_payoff[t] += r.cum_payoff[t] / n;
      out.active_users[t] += r.active_users[t] / n;
      out.cum_subscribers[t] += r.cum_subscribers[t] / n;
      if (r.free_exposure_rate[t]) {
        rate += *r.free_exposure_rate[t];
        ++defined;
      }
    }
    out.free_exposure_rate.push_back(defined ? std::optional<double>(rate / defined) : std::nullopt);
  }
  double share = 0.0;
  int defined = 0;
  for (const Trajectory& r : runs) {
    out.final_payoff += r.final_payoff / n;
    out.final_subscribers += r.final_subscribers / n;
    if (r.free_share) {
      share += *r.free_share;
      ++defined;
    }
  }
  if (defined) out.free_share = share / defined;
  return out;
}

void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  CsvWriter csv(os, {"t", "cum_payoff", "active_users", "cum_subscribers", "free_exposure_rate"});
  for (std::size_t t = 0; t < traj.cum_payoff.size(); ++t) {
    csv.row(t, traj.cum_payoff[t], traj.active_users[t], traj.cum_subscribers[t],
            traj.free_exposure_rate[t]);
  }
}

void write_events_csv(std::ostream& os, const EventLog& log) {
  CsvWriter csv(os, {"t", "user", "kind", "action", "payoff"});
  for (const SimEvent& e : log.events) {
    const char* kind = e.kind == SimEvent::Kind::Display      ? "display"
                       : e.kind == SimEvent::Kind::Conversion ? "conversion"
                                                              : "churn";
    csv.row(e.t, e.user, kind, e.kind == SimEvent::Kind::Display ? to_string(e.action) : "",
            e.payoff);
  }
}

// ---------------------------------------------------------------------------

std::vector<std::string> ablation_condition_names() {
  return {"gamma_high", "gamma_low", "r_high", "r_low",
          "kappa_high", "kappa_low", "omega_high", "omega_low"};
}

void apply_condition(std::string_view name, MarketParams& market, PopulationSpec& population) {
  if (name == "gamma_high") {
    population.gamma = Distribution::beta(5, 2);
  } else if (name == "gamma_low") {
    population.gamma = Distribution::beta(2, 5);
  } else if (name == "r_high") {
    population.r = Distribution::beta(5, 2);
  } else if (name == "r_low") {
    population.r = Distribution::beta(2, 5);
  } else if (name == "kappa_high" || name == "kappa_low") {
    market.kappa_free = name == "kappa_high" ? 1.3 : 0.5;
    // The paid tier never costs less to serve than the free tier.
    market.kappa_paid = std::max(market.kappa_paid, market.kappa_free);
  } else if (name == "omega_high") {
    market.omega = 0.5;
  } else if (name == "omega_low") {
    market.omega = 0.2;
  } else {
    throw ConfigError("ablation.conditions", "unknown condition \"" + std::string(name) + "\"");
  }
}

std::pair<double, double> mean_std(std::span<const double> xs) {
  if (xs.empty()) return {0.0, 0.0};
  const double n = static_cast<double>(xs.size());
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

AblationResult run_ablation(const SimConfig& base, std::span<const std::string> conditions,
                            std::span<const PolicyKind> policies,
                            std::span<const std::uint64_t> seeds, const SolveOptions& options,
                            int threads) {
  if (seeds.empty()) throw ConfigError("seeds", "must be non-empty");
  if (policies.empty()) throw ConfigError("ablation.policies", "must be non-empty");
  for (const std::string& c : conditions) {
    MarketParams m = base.market;
    PopulationSpec p = base.population;
    apply_condition(c, m, p);
  }

  AblationResult result;
  for (const std::string& name : conditions) {
    SimConfig cfg = base;
    apply_condition(name, cfg.market, cfg.population);
    cfg.validate();

    std::vector<UserType> users;
    for (std::uint64_t seed : seeds) {
      const auto cohort = cohort_types(cfg, seed);
      users.insert(users.end(), cohort.begin(), cohort.end());
    }
    std::vector<Policy> built;
    for (PolicyKind k : policies) {
      built.push_back(build_policy(k, cfg.market, cfg.population, cfg.n_bins, users, options, threads));
    }

    const std::size_t n_runs = policies.size() * seeds.size();
    std::vector<RunRecord> runs(n_runs);
    parallel_for(n_runs, threads, [&](std::size_t i) {
      const std::size_t pi = i / seeds.size();
      const std::uint64_t seed = seeds[i % seeds.size()];
      const Trajectory tr = compute_metrics(simulate_cohort(cfg, built[pi], seed));
      runs[i] = {name, policies[pi], seed, tr.final_payoff, tr.free_share, tr.final_subscribers};
    });

    ConditionSummary row;
    row.condition = name;
    row.policies.assign(policies.begin(), policies.end());
    for (std::size_t pi = 0; pi < policies.size(); ++pi) {
      std::vector<double> pay, subs, share;
      for (std::size_t k = 0; k < seeds.size(); ++k) {
        const RunRecord& r = runs[pi * seeds.size() + k];
        pay.push_back(r.final_payoff);
        subs.push_back(r.subscribers);
        if (r.free_share) share.push_back(*r.free_share);
      }
      const auto [pm, ps] = mean_std(pay);
      const auto [sm, ss] = mean_std(subs);
      row.payoff_mean.push_back(pm);
      row.payoff_std.push_back(ps);
      row.subs_mean.push_back(sm);
      row.subs_std.push_back(ss);
      row.free_share_mean.push_back(share.empty() ? std::nan("") : mean_std(share).first);
    }
    result.summary.push_back(std::move(row));
    result.runs.insert(result.runs.end(), runs.begin(), runs.end());
  }
  return result;
}

void write_runs_csv(std::ostream& os, std::span<const RunRecord> runs) {
  CsvWriter csv(os, {"condition", "policy", "seed", "final_payoff", "free_share", "subscribers"});
  for (const RunRecord& r : runs) {
    csv.row(r.condition, to_string(r.policy), r.seed, r.final_payoff, r.free_share, r.subscribers);
  }
}

void write_ablation_summary_csv(std::ostream& os, std::span<const ConditionSummary> rows) {
  if (rows.empty()) return;
  std::vector<std::string> header{"condition"};
  for (PolicyKind k : rows.front().policies) {
    const std::string p(to_string(k));
    for (const char* suffix : {"_payoff_mean", "_payoff_std", "_subs_mean", "_subs_std",
                               "_free_share"}) {
      header.push_back(p + suffix);
    }
  }
  CsvWriter csv(os, header);
  for (const ConditionSummary& r : rows) {
    std::vector<std::string> cells{r.condition};
    for (std::size_t i = 0; i < r.policies.size(); ++i) {
      for (double v : {r.payoff_mean[i], r.payoff_std[i], r.subs_mean[i], r.subs_std[i],
                       r.free_share_mean[i]}) {
        cells.push_back(format_real(v));
      }
    }
    csv.write(cells);
  }
}

}  // namespace gemdp
