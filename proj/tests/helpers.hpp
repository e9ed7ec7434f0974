#pragma once

#include <random>

#include "gemdp/config.hpp"
#include "gemdp/dp.hpp"

namespace gemdp::test {

/// Random small market for property tests. Coefficients are drawn wide
/// enough that both actions, conversion and churn all occur.
inline MarketParams random_market(std::mt19937_64& rng, int s_max, int c_max) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MarketParams m;
  m.beta = 0.3 + 0.65 * u(rng);
  m.price = 2.0 + 3.0 * u(rng);
  m.kappa_free = 1.5 * u(rng);
  m.kappa_paid = m.kappa_free + 2.0 * u(rng);
  m.omega = u(rng);
  m.utility = {4.0 * u(rng), 2.0 * u(rng) - 1.0, u(rng), 1.5 * u(rng), 2.0 * u(rng), 0.5 * u(rng)};
  m.revenue = {u(rng), 2.0 * u(rng), 0.3 * u(rng), 0.1 * u(rng)};
  m.retention = {u(rng), u(rng), u(rng)};
  m.conversion = {2.0 + 3.0 * u(rng), 0.3 * u(rng), 2.0 * u(rng), 0.3 * u(rng)};
  m.grid = {s_max, c_max};
  m.psi_cut = u(rng);
  m.n_q = 3;
  m.panel_seed = rng();
  m.reward_bound = 100.0;
  m.payoff_convention = u(rng) < 0.5 ? PayoffConvention::MainText : PayoffConvention::AppendixSim;
  return m;
}

inline UserType random_user(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return {u(rng), u(rng)};
}

inline QueryPanel random_panel(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<QueryDraw> draws;
  std::vector<double> weights;
  for (int j = 0; j < n; ++j) {
    draws.push_back({u(rng), u(rng)});
    weights.push_back(0.2 + u(rng));
  }
  return QueryPanel(std::move(draws), std::move(weights));
}

/// Random table with values in [-scale, scale].
inline ValueTable random_table(std::mt19937_64& rng, const DecisionModel& model, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  ValueTable v = initial_table(model);
  for (double& x : v.values) x = u(rng);
  return v;
}

}  // namespace gemdp::test
