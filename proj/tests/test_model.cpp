#include <doctest.h>

#include <cmath>
#include <limits>

#include "gemdp/errors.hpp"
#include "gemdp/model.hpp"

using namespace gemdp;

namespace {

MarketParams zero_market() {
  MarketParams m;
  m.beta = 0.9;
  m.grid = {10, 10};
  return m;
}

}  // namespace

TEST_CASE("utilities") {
  MarketParams m = zero_market();
  const Utilities z = utilities(m, {0.4, 0.5}, {0.3, 0.7}, {1, 2});
  CHECK(z.v_free == 0.0);
  CHECK(z.v_ad == 0.0);
  CHECK(z.v_out == 0.0);

  m.utility.w_psi = 1.0;
  m.utility.w_r_free = 0.5;
  CHECK(utilities(m, {}, {0.4, 0.6}, {}).v_free == doctest::Approx(0.8).epsilon(1e-12));

  m.utility = {0, 0, 0.5, 1.0, 1.0, 0.1};
  CHECK(utilities(m, {0.3, 0}, {0.2, 0}, {0, 2}).v_ad == doctest::Approx(0.2).epsilon(1e-12));

  m.omega = 0.7;
  CHECK(utilities(m, {}, {}, {}).v_out == 0.7);
}

TEST_CASE("logit share") {
  CHECK(logit_share(0.3, 0.3) == 0.5);
  CHECK(logit_share(1.0, 0.0) == doctest::Approx(0.7310585786300049).epsilon(1e-12));
  CHECK(logit_share(0.0, 1e6) == 0.0);
  CHECK(logit_share(700.0, -700.0) == 1.0);
  CHECK(logit_share(-700.0, 0.0) > 0.0);
  CHECK(std::isfinite(logit_share(-700.0, 700.0)));
}

TEST_CASE("engagement falls with the outside option") {
  MarketParams m = zero_market();
  m.utility = {2.0, 0.3, 0.5, 1.0, 1.0, 0.1};
  double prev_ad = 1.0, prev_free = 1.0;
  for (double w = 0.0; w <= 3.0; w += 0.25) {
    m.omega = w;
    const double ad = engage_prob(m, {0.4, 0.5}, {0.5, 0.5}, {0, 1}, Action::Ad);
    const double fr = engage_prob(m, {0.4, 0.5}, {0.5, 0.5}, {0, 1}, Action::Free);
    CHECK(ad > 0.0);
    CHECK(ad < prev_ad);
    CHECK(fr < prev_free);
    prev_ad = ad;
    prev_free = fr;
  }
}

TEST_CASE("ad revenue") {
  MarketParams m = zero_market();
  m.revenue = {1.0, 1.0, 0.2, 0.0};
  CHECK(conditional_ad_revenue(m, {0.5, 0}, {0, 10}) == 0.0);
  m.revenue.b_c = 0.0;
  CHECK(conditional_ad_revenue(m, {0.5, 0}, {0, 10}) == doctest::Approx(1.5));
  m.revenue = {};
  CHECK(conditional_ad_revenue(m, {0.0, 0}, {}) == 0.0);
}

TEST_CASE("flow payoff conventions") {
  MarketParams m = zero_market();
  m.kappa_free = 0.9;
  m.kappa_paid = 0.9;
  m.revenue.b0 = 2.0;
  m.payoff_convention = PayoffConvention::MainText;
  CHECK(flow_payoff(m, {}, {}, {}, Action::Free, false) == doctest::Approx(-0.9));
  CHECK(flow_payoff(m, {}, {}, {}, Action::Ad, true) == doctest::Approx(1.1));
  CHECK(flow_payoff(m, {}, {}, {}, Action::Ad, false) == doctest::Approx(-0.9));
  m.payoff_convention = PayoffConvention::AppendixSim;
  CHECK(flow_payoff(m, {}, {}, {}, Action::Ad, false) == 0.0);
  CHECK(flow_payoff(m, {}, {}, {}, Action::Free, false) == 0.0);
  CHECK(flow_payoff(m, {}, {}, {}, Action::Free, true) == doctest::Approx(-0.9));
  CHECK(flow_payoff(m, {}, {}, {}, Action::Ad, true) == doctest::Approx(2.0));
  CHECK_THROWS_AS(flow_payoff(m, {}, {}, {0, 0, true, true}, Action::Ad, true),
                  std::invalid_argument);
}

TEST_CASE("state transitions") {
  MarketParams m = zero_market();
  m.psi_cut = 0.5;
  CHECK(transition(m, {0, 0.9}, {3, 0}, Action::Free, true).s == 5);
  CHECK(transition(m, {0, 0.1}, {3, 0}, Action::Free, true).s == 4);
  CHECK(transition(m, {}, {0, 2}, Action::Ad, true).c == 3);
  const UserState st{4, 2};
  CHECK(transition(m, {0.5, 0.9}, st, Action::Free, false) == st);
  CHECK(transition(m, {0.5, 0.9}, st, Action::Ad, false) == st);
  CHECK(transition(m, {0, 0.9}, {9, 0}, Action::Free, true).s == 10);
  CHECK(transition(m, {}, {0, 10}, Action::Ad, true).c == 10);
}

TEST_CASE("conversion") {
  MarketParams m = zero_market();
  m.price = 4.0;
  m.conversion = {6.0, 0.5, 2.0, 0.25};
  const UserType x{0.0, 0.5};
  CHECK(conversion_cutoff(m, x, 4) == 6);
  CHECK(conversion_update(m, x, {6, 4}).subscribed);
  CHECK_FALSE(conversion_update(m, x, {5, 4}).subscribed);
  CHECK(conversion_update(m, x, {0, 0, true, false}).subscribed);
  CHECK(conversion_update(m, x, {0, 0, true, false}).active);
  m.conversion.tau_c = 10.0;
  CHECK(conversion_update(m, x, {0, 4}).subscribed);
}

TEST_CASE("conversion is monotone in experience") {
  MarketParams m = zero_market();
  m.price = 4.0;
  m.conversion = {5.3, 0.4, 1.7, 0.3};
  for (double theta : {0.0, 0.3, 1.0}) {
    for (int c = 0; c <= 10; ++c) {
      bool seen = false;
      for (int s = 0; s <= 10; ++s) {
        const bool z = conversion_update(m, {0, theta}, {s, c}).subscribed;
        if (seen) CHECK(z);
        seen = seen || z;
      }
    }
  }
}

TEST_CASE("retention") {
  MarketParams m = zero_market();
  m.retention = {0.2, 0.0, 0.0};
  CHECK(retention_prob(m, {3, 4}) == doctest::Approx(0.6));
  CHECK(retention_prob(m, {3, 4, true, true}) == 1.0);
  m.retention = {1.0, 0.7, 0.4};
  for (int s = 0; s < 5; ++s) CHECK(retention_prob(m, {s, 5 - s}) == 1.0);
  m.retention = {0.3, 0.5, 0.8};
  for (int s = 0; s <= 10; ++s) {
    for (int c = 0; c <= 10; ++c) {
      const double r = retention_prob(m, {s, c});
      CHECK(r >= 0.3);
      CHECK(r <= 1.0);
    }
  }
}

TEST_CASE("parameter validation names the field") {
  MarketParams m = zero_market();
  m.beta = 1.0;
  try {
    m.validate();
    FAIL("beta = 1 accepted");
  } catch (const ConfigError& e) {
    CHECK(e.key() == "market.beta");
  }
  m.beta = 0.9;
  m.kappa_free = 2.0;
  m.kappa_paid = 1.0;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.kappa_paid = 2.0;
  m.retention.rho_min = 1.5;
  CHECK_THROWS_AS(m.validate(), ConfigError);
  m.retention.rho_min = 0.5;
  m.price = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("population sampling") {
  const PopulationSpec uniform{};
  CHECK(sample_user(uniform, 7, 3) == sample_user(uniform, 7, 3));
  CHECK(sample_query(uniform, 7, 3, 2) == sample_query(uniform, 7, 3, 2));
  CHECK_FALSE(sample_query(uniform, 7, 3, 2) == sample_query(uniform, 7, 3, 1));

  for (auto [a, b] : {std::pair{5.0, 2.0}, {2.0, 5.0}}) {
    const Distribution d = Distribution::beta(a, b);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
      const double x = sample(d, {11, static_cast<std::uint64_t>(i), 0, Purpose::Test, 0});
      REQUIRE(x >= 0.0);
      REQUIRE(x <= 1.0);
      sum += x;
    }
    CHECK(std::abs(sum / n - a / (a + b)) <= 0.01);
  }
  CHECK_THROWS_AS(Distribution::beta(0.0, 1.0).validate("population.gamma"), ConfigError);
}
