#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "gemdp/config.hpp"
#include "gemdp/errors.hpp"
#include "gemdp/welfare.hpp"
#include "helpers.hpp"

using namespace gemdp;

namespace {

MarketParams small_market(double beta) {
  MarketParams m = default_market_params(beta);
  m.grid = {8, 8};
  m.n_q = 12;
  return m;
}

}  // namespace

TEST_CASE("centred inclusive value") {
  CHECK(inclusive_value(0.0, 0.0) == 0.0);
  CHECK(inclusive_value(1.0, 0.0) == doctest::Approx(0.6201145069582775).epsilon(1e-14));
  CHECK(inclusive_value(0.0, 1.0) == inclusive_value(1.0, 0.0));
  // Large arguments stay finite.
  CHECK(inclusive_value(800.0, 0.0) == doctest::Approx(800.0 - std::log(2.0)));
}

TEST_CASE("benefit kinds") {
  const MarketParams m = small_market(0.9);
  const UserType x{0.3, 0.6};
  const QueryDraw q{0.4, 0.7};
  WelfareParams wp;
  wp.benefit = BenefitKind::Zero;
  CHECK(user_benefit(wp, m, x, q, {}, Action::Ad) == 0.0);
  CHECK(user_benefit(wp, m, x, q, {2, 3}, Action::Free) == 0.0);
  wp.benefit = BenefitKind::PerAction;
  wp.benefit_ad = -0.2;
  wp.benefit_free = 0.3;
  CHECK(user_benefit(wp, m, x, q, {}, Action::Ad) == -0.2);
  CHECK(user_benefit(wp, m, x, q, {}, Action::Free) == 0.3);
  wp.benefit = BenefitKind::InclusiveValue;
  const Utilities v = utilities(m, x, q, {});
  CHECK(user_benefit(wp, m, x, q, {}, Action::Free) == inclusive_value(v.v_free, v.v_out));
  for (BenefitKind k : {BenefitKind::InclusiveValue, BenefitKind::Zero, BenefitKind::PerAction}) {
    CHECK(benefit_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(benefit_kind_from_string("surplus"), ConfigError);
}

TEST_CASE("bounds from configured constants") {
  const MarketParams m = small_market(0.9);
  WelfareParams wp;
  wp.benefit = BenefitKind::PerAction;
  wp.benefit_ad = 0.5;
  wp.benefit_free = -0.5;
  wp.w_sub = m.subscription_margin() + 0.5;
  const WelfareBounds b = resolve_welfare_bounds(wp, m);
  CHECK(b.u_max == 0.5);
  CHECK(b.delta_sub_max == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b.eps_sw == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(b.value_bound == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(b.band == doctest::Approx(10.0).epsilon(1e-12));
}

TEST_CASE("configured bounds below the scan are rejected") {
  const MarketParams m = small_market(0.9);
  WelfareParams wp;
  wp.u_max = 0.01;
  try {
    resolve_welfare_bounds(wp, m);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "welfare.u_max");
  }
  wp.u_max.reset();
  wp.w_sub = m.subscription_margin() + 1.0;
  wp.delta_sub_max = 0.5;
  try {
    resolve_welfare_bounds(wp, m);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "welfare.delta_sub_max");
  }
  wp.delta_sub_max = 2.0;
  CHECK(resolve_welfare_bounds(wp, m).delta_sub_max == 2.0);
}

TEST_CASE("scanned bound covers random decision points") {
  const MarketParams m = small_market(0.9);
  const WelfareParams wp;
  const WelfareBounds b = resolve_welfare_bounds(wp, m);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> c(0, m.grid.c_max);
  for (int k = 0; k < 2000; ++k) {
    const UserType x{u(rng), u(rng)};
    const QueryDraw q{u(rng), u(rng)};
    for (Action a : {Action::Ad, Action::Free}) {
      CHECK(std::abs(user_benefit(wp, m, x, q, {0, c(rng)}, a)) <= b.u_max + 1e-12);
    }
  }
}

TEST_CASE("zero benefit reproduces the revenue solve") {
  const MarketParams m = small_market(0.9);
  const UserType x{0.5, 0.5};
  const QueryPanel panel = QueryPanel::for_market(m, {});
  WelfareParams wp;
  wp.benefit = BenefitKind::Zero;
  const WelfareModel wm(m, x, wp);
  const TrueModel rm(m, x);
  const SolveOptions opts{1e-10, 100000};
  const BellmanOperator rop(rm, panel), wop(wm, panel);
  const ValueTable v = value_iterate(rop, opts);
  const WelfareSolve w = welfare_solve(wm, panel, opts);
  CHECK(sup_distance(v, w.values) <= 1e-9);
  CHECK(w.decisions == rop.greedy_decisions(v));
  const AlignmentReport rep = welfare_compare(rop, v, wop, w.values, resolve_welfare_bounds(wp, m),
                                              opts.tol);
  CHECK(rep.ok());
  CHECK(rep.bounds.band == 0.0);
  CHECK(rep.disagreements.empty());
  CHECK(rep.total_agreements == rep.points);
}

TEST_CASE("subscribed welfare value is the closed form") {
  const MarketParams m = small_market(0.8);
  WelfareParams wp;
  wp.w_sub = 1.7;
  const WelfareModel wm(m, {0.4, 0.4}, wp);
  CHECK(wm.subscribed_value() == doctest::Approx(1.7 / 0.2).epsilon(1e-12));
  const WelfareSolve w = welfare_solve(wm, QueryPanel::for_market(m, {}), {1e-10, 100000});
  CHECK(w.values.v_sub == doctest::Approx(8.5).epsilon(1e-12));
  wp.w_sub.reset();
  CHECK(WelfareModel(m, {0.4, 0.4}, wp).subscribed_flow() == m.subscription_margin());
}

TEST_CASE("welfare policy follows the sign rule") {
  const MarketParams m = small_market(0.9);
  const QueryPanel panel = QueryPanel::for_market(m, {});
  const WelfareModel wm(m, {0.7, 0.2}, WelfareParams{});
  const WelfareSolve w = welfare_solve(wm, panel, {1e-10, 100000});
  const BellmanOperator op(wm, panel);
  for (std::size_t cell = 0; cell < op.grid().size(); ++cell) {
    for (std::size_t j = 0; j < panel.size(); ++j) {
      const auto q = op.action_values(cell, j, w.values);
      const Action expect = q[0] >= q[1] ? Action::Ad : Action::Free;
      CHECK(w.decisions[cell * panel.size() + j] == expect);
    }
  }
}

TEST_CASE("welfare operator contracts") {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 30; ++trial) {
    const MarketParams m = test::random_market(rng, 4, 4);
    const WelfareModel wm(m, test::random_user(rng), WelfareParams{});
    const BellmanOperator op(wm, test::random_panel(rng, 3));
    const ValueTable a = test::random_table(rng, wm, 10.0);
    const ValueTable b = test::random_table(rng, wm, 10.0);
    CHECK(sup_distance(op.apply(a), op.apply(b)) <= m.beta * sup_distance(a, b) + 1e-12);
  }
}

TEST_CASE("value and edge gaps respect their bounds") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 8; ++trial) {
    MarketParams m = test::random_market(rng, 5, 5);
    const UserType x = test::random_user(rng);
    const QueryPanel panel = test::random_panel(rng, 4);
    WelfareParams wp;
    if (trial % 2 == 1) {
      wp.benefit = BenefitKind::PerAction;
      wp.benefit_ad = -0.05;
      wp.benefit_free = 0.05;
    }
    const WelfareBounds bounds = resolve_welfare_bounds(wp, m);
    const TrueModel rm(m, x);
    const WelfareModel wm(m, x, wp);
    const BellmanOperator rop(rm, panel), wop(wm, panel);
    const double tol = 1e-10;
    const ValueTable v = value_iterate(rop, {tol, 100000});
    const ValueTable w = value_iterate(wop, {tol, 100000});
    const AlignmentReport rep = welfare_compare(rop, v, wop, w, bounds, tol);
    CHECK(rep.value_ok);
    CHECK(rep.edge_ok);
    CHECK(rep.agreement_ok);
    CHECK(rep.agreements == rep.margin_points);
    CHECK(rep.value_gap <= bounds.value_bound + 1e-8);
  }
}

TEST_CASE("disagreement CSV header") {
  std::ostringstream os;
  write_disagreements_csv(os, std::vector<AlignmentPoint>{});
  CHECK(os.str() == "s,c,r,psi,delta,delta_sw,action,action_sw,outside_band\n");
}
