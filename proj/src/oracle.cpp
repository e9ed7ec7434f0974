// Exhaustive enumeration over model-core primitives. Shares nothing with the
// tabular operator beyond the primitives themselves.
#include <algorithm>
#include <stdexcept>
#include <string>

#include "gemdp/dp.hpp"

namespace gemdp {
namespace {

struct Enumerator {
  const MarketParams& params;
  const UserType& user;
  const QueryPanel& queries;
  const DecisionRule* rule;  // null: maximise
  double v_sub;

  double branch(const UserState& state, const QueryDraw& q, Action a, int remaining) const {
    const double m = engage_prob(params, user, q, state, a);
    double total = 0.0;
    for (bool engaged : {false, true}) {
      const double p = engaged ? m : 1.0 - m;
      const UserState post =
          conversion_update(params, user, transition(params, q, state, a, engaged));
      const double next = post.subscribed ? v_sub : value(post, remaining - 1);
      total += p * (flow_payoff(params, user, q, state, a, engaged) +
                    params.beta * retention_prob(params, post) * next);
    }
    return total;
  }

  double value(const UserState& state, int remaining) const {
    if (remaining == 0) return 0.0;
    double v = 0.0;
    for (std::size_t j = 0; j < queries.size(); ++j) {
      const QueryDraw& q = queries.draw(j);
      double best;
      if (rule) {
        best = branch(state, q, (*rule)(state, j), remaining);
      } else {
        best = std::max(branch(state, q, Action::Ad, remaining),
                        branch(state, q, Action::Free, remaining));
      }
      v += queries.weight(j) * best;
    }
    return v;
  }
};

void check_caps(const MarketParams& params, const QueryPanel& queries, int horizon,
                const UserState& start) {
  const int cells = (params.grid.s_max + 1) * (params.grid.c_max + 1);
  if (cells > 16) {
    throw std::invalid_argument("brute_force_oracle: " + std::to_string(cells) +
                                " grid cells exceeds the cap of 16");
  }
  if (queries.size() == 0 || queries.size() > 3) {
    throw std::invalid_argument("brute_force_oracle: query support must have 1 to 3 points");
  }
  if (horizon < 0 || horizon > 4) {
    throw std::invalid_argument("brute_force_oracle: horizon must lie in [0, 4]");
  }
  if (start.subscribed) throw std::invalid_argument("brute_force_oracle: start is subscribed");
}

}  // namespace

double brute_force_oracle(const MarketParams& params, const UserType& user,
                          const QueryPanel& queries, int horizon, const UserState& start) {
  check_caps(params, queries, horizon, start);
  const Enumerator e{params, user, queries, nullptr, subscribed_value(params)};
  return e.value(start, horizon);
}

double brute_force_policy_value(const MarketParams& params, const UserType& user,
                                const QueryPanel& queries, int horizon, const UserState& start,
                                const DecisionRule& rule) {
  check_caps(params, queries, horizon, start);
  if (!rule) throw std::invalid_argument("brute_force_policy_value: empty rule");
  const Enumerator e{params, user, queries, &rule, subscribed_value(params)};
  return e.value(start, horizon);
}

}  // namespace gemdp
