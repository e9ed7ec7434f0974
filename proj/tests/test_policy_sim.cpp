#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "gemdp/config.hpp"
#include "gemdp/errors.hpp"
#include "gemdp/policy_sim.hpp"

using namespace gemdp;

namespace {

SimConfig small_sim(int n_users = 40, int horizon = 8) {
  SimConfig cfg;
  cfg.n_users = n_users;
  cfg.horizon = horizon;
  cfg.n_bins = 3;
  cfg.market = default_market_params(0.9);
  cfg.market.grid = {8, 8};
  cfg.market.n_q = 12;
  return cfg;
}

Policy make(PolicyKind kind, const SimConfig& cfg, std::uint64_t seed, int threads = 1) {
  const auto users = cohort_types(cfg, seed);
  return build_policy(kind, cfg.market, cfg.population, cfg.n_bins, users, {}, threads);
}

bool same_events(const EventLog& a, const EventLog& b) {
  if (a.events.size() != b.events.size()) return false;
  for (std::size_t i = 0; i < a.events.size(); ++i) {
    const SimEvent& x = a.events[i];
    const SimEvent& y = b.events[i];
    if (x.t != y.t || x.user != y.user || x.kind != y.kind || x.action != y.action ||
        x.payoff != y.payoff) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("policy names round trip") {
  for (PolicyKind k : {PolicyKind::OptimalDP, PolicyKind::OneStepGreedy, PolicyKind::AlwaysAd,
                       PolicyKind::AlwaysFree}) {
    CHECK(policy_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(policy_kind_from_string("random"), ConfigError);
}

TEST_CASE("type binning maps to the nearest grid point") {
  const TypeBinning b(5);
  CHECK(b.size() == 25);
  CHECK(b.bin({0.0, 0.0}) == 0);
  CHECK(b.bin({1.0, 1.0}) == 24);
  CHECK(b.bin({0.49, 0.13}) == 2 * 5 + 1);
  const UserType c = b.center(b.bin({0.49, 0.13}));
  CHECK(c.gamma == doctest::Approx(0.5));
  CHECK(c.theta == doctest::Approx(0.25));
  CHECK(TypeBinning(1).bin({0.9, 0.1}) == 0);
  CHECK_THROWS_AS(TypeBinning(0), ConfigError);
}

TEST_CASE("fixed rules ignore the state") {
  const SimConfig cfg = small_sim();
  const Policy ad = make(PolicyKind::AlwaysAd, cfg, 1);
  const Policy fr = make(PolicyKind::AlwaysFree, cfg, 1);
  for (double psi : {0.0, 0.5, 1.0}) {
    CHECK(ad.decide({0.1, 0.9}, {2, 3}, {0.3, psi}) == Action::Ad);
    CHECK(fr.decide({0.1, 0.9}, {2, 3}, {0.3, psi}) == Action::Free);
  }
}

TEST_CASE("greedy breaks a zero-revenue tie toward ads") {
  SimConfig cfg = small_sim();
  cfg.market.revenue = {};
  cfg.market.kappa_free = 0.0;
  cfg.market.kappa_paid = cfg.market.price;
  const Policy g = make(PolicyKind::OneStepGreedy, cfg, 1);
  CHECK(g.decide({0.5, 0.5}, {0, 0}, {0.5, 0.9}) == Action::Ad);
  CHECK(g.decide({0.5, 0.5}, {3, 1}, {0.1, 0.1}) == Action::Ad);
}

TEST_CASE("greedy shows the free answer when it converts next period") {
  SimConfig cfg = small_sim();
  cfg.market.utility.w_psi = 20.0;
  const UserType x{0.5, 0.5};
  const int cut = conversion_cutoff(cfg.market, x, 0);
  REQUIRE(cut >= 2);
  REQUIRE(cut <= cfg.market.grid.s_max);
  const Policy g = make(PolicyKind::OneStepGreedy, cfg, 1);
  CHECK(g.decide(x, {cut - 1, 0}, {0.5, 0.9}) == Action::Free);
  // Far from the cutoff the surrogate continuation is flat, so ads win.
  CHECK(g.decide(x, {0, 0}, {0.9, 0.1}) == Action::Ad);
}

TEST_CASE("optimal policy solves only occupied bins") {
  const SimConfig cfg = small_sim();
  const std::vector<UserType> users{{0.0, 0.0}, {0.05, 0.02}, {1.0, 1.0}};
  const Policy p = build_policy(PolicyKind::OptimalDP, cfg.market, cfg.population, 3, users);
  CHECK(p.solved_bins() == 2);
  CHECK_THROWS_AS(p.decide({0.5, 0.5}, {0, 0}, {0.5, 0.5}), std::logic_error);
}

TEST_CASE("simulation is deterministic across runs and thread counts") {
  const SimConfig cfg = small_sim(60, 10);
  for (PolicyKind k : {PolicyKind::OptimalDP, PolicyKind::OneStepGreedy, PolicyKind::AlwaysFree}) {
    const Policy p1 = make(k, cfg, 7, 1);
    const Policy p8 = make(k, cfg, 7, 8);
    const EventLog a = simulate_cohort(cfg, p1, 7, 1);
    const EventLog b = simulate_cohort(cfg, p1, 7, 1);
    const EventLog c = simulate_cohort(cfg, p8, 7, 8);
    CHECK(same_events(a, b));
    CHECK(same_events(a, c));
    std::ostringstream sa, sc;
    write_events_csv(sa, a);
    write_events_csv(sc, c);
    CHECK(sa.str() == sc.str());
  }
  const Policy p = make(PolicyKind::AlwaysAd, cfg, 7);
  CHECK_FALSE(same_events(simulate_cohort(cfg, p, 7), simulate_cohort(cfg, p, 8)));
}

TEST_CASE("free answers at zero cost with no conversion earn nothing") {
  SimConfig cfg = small_sim();
  cfg.market.kappa_free = 0.0;
  cfg.market.conversion.tau0 = 1000.0;
  for (PayoffConvention pc : {PayoffConvention::MainText, PayoffConvention::AppendixSim}) {
    cfg.market.payoff_convention = pc;
    const Policy p = make(PolicyKind::AlwaysFree, cfg, 3);
    const Trajectory tr = compute_metrics(simulate_cohort(cfg, p, 3));
    CHECK(tr.final_payoff == 0.0);
    CHECK(tr.final_subscribers == 0.0);
    REQUIRE(tr.free_share.has_value());
    CHECK(*tr.free_share == 1.0);
  }
}

TEST_CASE("without churn or conversion every user stays active") {
  SimConfig cfg = small_sim(50, 12);
  cfg.market.retention.rho_min = 1.0;
  cfg.market.conversion.tau0 = 1000.0;
  const Policy p = make(PolicyKind::OneStepGreedy, cfg, 11);
  const Trajectory tr = compute_metrics(simulate_cohort(cfg, p, 11));
  for (double a : tr.active_users) CHECK(a == 50.0);
  for (const auto& rate : tr.free_exposure_rate) CHECK(rate.has_value());
}

TEST_CASE("users who convert immediately leave no display record") {
  SimConfig cfg = small_sim(30, 6);
  cfg.market.conversion.tau0 = -100.0;
  const Policy p = make(PolicyKind::AlwaysAd, cfg, 5);
  const EventLog log = simulate_cohort(cfg, p, 5);
  const Trajectory tr = compute_metrics(log);
  CHECK(tr.final_subscribers == 30.0);
  CHECK(tr.final_payoff == doctest::Approx(30.0 * subscribed_value(cfg.market)).epsilon(1e-12));
  for (const auto& rate : tr.free_exposure_rate) CHECK_FALSE(rate.has_value());
  CHECK_FALSE(tr.free_share.has_value());
}

TEST_CASE("cumulative series are monotone and payoffs match the event log") {
  const SimConfig cfg = small_sim(80, 15);
  const Policy p = make(PolicyKind::OptimalDP, cfg, 21);
  const EventLog log = simulate_cohort(cfg, p, 21);
  const Trajectory tr = compute_metrics(log);
  double total = 0.0;
  for (const SimEvent& e : log.events) total += e.payoff;
  CHECK(tr.final_payoff == doctest::Approx(total).epsilon(1e-12));
  for (std::size_t t = 1; t < tr.cum_subscribers.size(); ++t) {
    CHECK(tr.cum_subscribers[t] >= tr.cum_subscribers[t - 1]);
    CHECK(tr.active_users[t] <= tr.active_users[t - 1]);
  }
  EventLog empty;
  CHECK_THROWS_AS(compute_metrics(empty), std::invalid_argument);
}

TEST_CASE("mean trajectory averages exposure over defined runs") {
  Trajectory a, b;
  a.cum_payoff = {1.0, 2.0};
  b.cum_payoff = {3.0, 4.0};
  a.active_users = b.active_users = {1.0, 1.0};
  a.cum_subscribers = b.cum_subscribers = {0.0, 0.0};
  a.free_exposure_rate = {0.2, std::nullopt};
  b.free_exposure_rate = {0.4, std::nullopt};
  a.final_payoff = 2.0;
  b.final_payoff = 4.0;
  const std::vector<Trajectory> runs{a, b};
  const Trajectory m = mean_trajectory(runs);
  CHECK(m.cum_payoff[1] == doctest::Approx(3.0));
  CHECK(*m.free_exposure_rate[0] == doctest::Approx(0.3));
  CHECK_FALSE(m.free_exposure_rate[1].has_value());
  CHECK(m.final_payoff == doctest::Approx(3.0));
}

TEST_CASE("sample mean and standard deviation") {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  const auto [mean, sd] = mean_std(xs);
  CHECK(mean == doctest::Approx(2.5));
  CHECK(sd == doctest::Approx(std::sqrt(5.0 / 3.0)));
  const std::vector<double> one{7.0};
  CHECK(mean_std(one).second == 0.0);
}

TEST_CASE("ablation covers every condition, policy and seed") {
  SimConfig cfg = small_sim(15, 5);
  const auto conditions = ablation_condition_names();
  const std::vector<PolicyKind> policies{PolicyKind::OptimalDP, PolicyKind::OneStepGreedy,
                                         PolicyKind::AlwaysAd, PolicyKind::AlwaysFree};
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  const AblationResult r = run_ablation(cfg, conditions, policies, seeds, {}, 4);
  CHECK(r.runs.size() == 160);
  CHECK(r.summary.size() == 8);
  CHECK(r.runs.front().condition == "gamma_high");
  CHECK(r.runs.back().condition == "omega_low");
  CHECK(r.runs.back().policy == PolicyKind::AlwaysFree);
  std::ostringstream os;
  write_runs_csv(os, r.runs);
  std::size_t lines = 0;
  for (char ch : os.str()) lines += ch == '\n';
  CHECK(lines == 161);

  const std::vector<std::string> bad{"gamma_high", "beta_high"};
  CHECK_THROWS_AS(run_ablation(cfg, bad, policies, seeds), ConfigError);
}

TEST_CASE("conditions change only their own primitive") {
  MarketParams m = default_market_params(0.95);
  PopulationSpec pop;
  apply_condition("kappa_high", m, pop);
  CHECK(m.kappa_free == 1.3);
  CHECK(m.kappa_paid >= m.kappa_free);
  apply_condition("omega_low", m, pop);
  CHECK(m.omega == 0.2);
  apply_condition("gamma_low", m, pop);
  CHECK(pop.gamma.mean() == doctest::Approx(2.0 / 7.0));
  CHECK(pop.r.kind == Distribution::Kind::Uniform);
  CHECK_THROWS_AS(apply_condition("nope", m, pop), ConfigError);
}
