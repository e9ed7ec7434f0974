#include "gemdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/beta.hpp>

#include "gemdp/errors.hpp"

namespace gemdp {

std::string_view to_string(Action a) { return a == Action::Ad ? "ad" : "free"; }

std::string_view to_string(PayoffConvention c) {
  return c == PayoffConvention::MainText ? "main_text" : "appendix_sim";
}

PayoffConvention payoff_convention_from_string(std::string_view name) {
  if (name == "main_text") return PayoffConvention::MainText;
  if (name == "appendix_sim") return PayoffConvention::AppendixSim;
  throw ConfigError("market.payoff_convention",
                    "must be \"main_text\" or \"appendix_sim\", got \"" + std::string(name) + "\"");
}

namespace {

void require_finite(double v, const char* key) {
  if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
}

void require_unit(double v, const std::string& key) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must lie in [0, 1]");
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

void require_pre_subscription(const UserState& state, const char* what) {
  if (state.subscribed) {
    throw std::invalid_argument(std::string(what) +
                                ": subscribed users have no display decision");
  }
}

}  // namespace

void MarketParams::validate() const {
  for (auto [v, key] : {std::pair{beta, "market.beta"},
                        {price, "market.price"},
                        {kappa_free, "market.kappa_free"},
                        {kappa_paid, "market.kappa_paid"},
                        {omega, "market.omega"},
                        {utility.w_psi, "market.utility.w_psi"},
                        {utility.w_r_free, "market.utility.w_r_free"},
                        {utility.u0_ad, "market.utility.u0_ad"},
                        {utility.ur_ad, "market.utility.ur_ad"},
                        {utility.w_gamma, "market.utility.w_gamma"},
                        {utility.uc_ad, "market.utility.uc_ad"},
                        {revenue.b0, "market.revenue.b0"},
                        {revenue.b_r, "market.revenue.b_r"},
                        {revenue.b_c, "market.revenue.b_c"},
                        {revenue.b_s, "market.revenue.b_s"},
                        {retention.rho_min, "market.retention.rho_min"},
                        {retention.alpha_s, "market.retention.alpha_s"},
                        {retention.alpha_c, "market.retention.alpha_c"},
                        {conversion.tau0, "market.conversion.tau0"},
                        {conversion.tau_p, "market.conversion.tau_p"},
                        {conversion.tau_theta, "market.conversion.tau_theta"},
                        {conversion.tau_c, "market.conversion.tau_c"},
                        {psi_cut, "market.psi_cut"},
                        {reward_bound, "market.reward_bound"}}) {
    require_finite(v, key);
  }
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("market.beta", "must lie in (0, 1)");
  if (kappa_free < 0.0) throw ConfigError("market.kappa_free", "must be >= 0");
  if (kappa_paid < kappa_free) throw ConfigError("market.kappa_paid", "must be >= kappa_free");
  if (omega < 0.0) throw ConfigError("market.omega", "must be >= 0");
  require_unit(retention.rho_min, "market.retention.rho_min");
  if (retention.alpha_s < 0.0) throw ConfigError("market.retention.alpha_s", "must be >= 0");
  if (retention.alpha_c < 0.0) throw ConfigError("market.retention.alpha_c", "must be >= 0");
  if (grid.s_max < 1) throw ConfigError("market.grid.s_max", "must be >= 1");
  if (grid.c_max < 1) throw ConfigError("market.grid.c_max", "must be >= 1");
  require_unit(psi_cut, "market.psi_cut");
  if (n_q < 1) throw ConfigError("market.n_q", "must be >= 1");
  if (!(reward_bound > 0.0)) throw ConfigError("market.reward_bound", "must be > 0");
  if (std::abs(subscription_margin()) > reward_bound) {
    throw ConfigError("market.price", "|price - kappa_paid| exceeds market.reward_bound");
  }
}

void UserType::validate() const {
  require_unit(gamma, "user.gamma");
  require_unit(theta, "user.theta");
}

void QueryDraw::validate() const {
  require_unit(r, "query.r");
  require_unit(psi, "query.psi");
}

Utilities utilities(const MarketParams& params, const UserType& user, const QueryDraw& query,
                    const UserState& state) {
  const auto& u = params.utility;
  Utilities out;
  out.v_free = u.w_psi * query.psi + u.w_r_free * query.r;
  out.v_ad = u.u0_ad + u.ur_ad * query.r - u.w_gamma * user.gamma - u.uc_ad * state.c;
  out.v_out = params.omega;
  return out;
}

double logit_share(double v, double v_out) {
  const double d = v - v_out;
  if (d >= 0.0) return 1.0 / (1.0 + std::exp(-d));
  const double e = std::exp(d);
  return e / (1.0 + e);
}

double engage_prob(const MarketParams& params, const UserType& user, const QueryDraw& query,
                   const UserState& state, Action action) {
  const Utilities v = utilities(params, user, query, state);
  return logit_share(action == Action::Ad ? v.v_ad : v.v_free, v.v_out);
}

double conditional_ad_revenue(const MarketParams& params, const QueryDraw& query,
                              const UserState& state) {
  const auto& b = params.revenue;
  return std::max(b.b0 + b.b_r * query.r - b.b_c * state.c - b.b_s * state.s, 0.0);
}

double flow_payoff(const MarketParams& params, const UserType& /*user*/, const QueryDraw& query,
                   const UserState& state, Action action, bool engaged) {
  require_pre_subscription(state, "flow_payoff");
  const double revenue = action == Action::Ad ? conditional_ad_revenue(params, query, state) : 0.0;
  switch (params.payoff_convention) {
    case PayoffConvention::MainText:
      return -params.kappa_free + (engaged ? revenue : 0.0);
    case PayoffConvention::AppendixSim:
      if (!engaged) return 0.0;
      return action == Action::Ad ? revenue : -params.kappa_free;
  }
  return 0.0;
}

double expected_flow(const MarketParams& params, const UserType& user, const QueryDraw& query,
                     const UserState& state, Action action) {
  const double m = engage_prob(params, user, query, state, action);
  return m * flow_payoff(params, user, query, state, action, true) +
         (1.0 - m) * flow_payoff(params, user, query, state, action, false);
}

int experience_increment(const MarketParams& params, double psi) {
  return 1 + (psi >= params.psi_cut ? 1 : 0);
}

UserState transition(const MarketParams& params, const QueryDraw& query, const UserState& state,
                     Action action, bool engaged) {
  require_pre_subscription(state, "transition");
  UserState next = state;
  if (!engaged) return next;
  if (action == Action::Free) {
    next.s = std::min(state.s + experience_increment(params, query.psi), params.grid.s_max);
  } else {
    next.c = std::min(state.c + 1, params.grid.c_max);
  }
  return next;
}

double conversion_threshold(const MarketParams& params, const UserType& user, int c) {
  const auto& k = params.conversion;
  return k.tau0 + k.tau_p * params.price - k.tau_theta * user.theta - k.tau_c * c;
}

int conversion_cutoff(const MarketParams& params, const UserType& user, int c) {
  const double tau = conversion_threshold(params, user, c);
  // Guard against tau landing a few ulps above an integer it should equal.
  const double guarded = tau - 1e-12 * std::max(1.0, std::abs(tau));
  return static_cast<int>(std::ceil(guarded));
}

UserState conversion_update(const MarketParams& params, const UserType& user,
                            const UserState& state) {
  UserState next = state;
  if (!next.subscribed && next.s >= conversion_cutoff(params, user, next.c)) {
    next.subscribed = true;
  }
  if (next.subscribed) next.active = true;
  return next;
}

double retention_prob(const MarketParams& params, const UserState& state) {
  if (state.subscribed) return 1.0;
  const auto& k = params.retention;
  return k.rho_min + (1.0 - k.rho_min) * sigmoid(k.alpha_s * state.s - k.alpha_c * state.c);
}

// ---------------------------------------------------------------------------

Distribution Distribution::beta(double a, double b) {
  Distribution d;
  d.kind = Kind::Beta;
  d.a = a;
  d.b = b;
  return d;
}

double Distribution::quantile(double u) const {
  if (kind == Kind::Uniform) return std::clamp(u, 0.0, 1.0);
  const boost::math::beta_distribution<double> dist(a, b);
  return std::clamp(boost::math::quantile(dist, u), 0.0, 1.0);
}

double Distribution::mean() const { return kind == Kind::Uniform ? 0.5 : a / (a + b); }

void Distribution::validate(const std::string& key) const {
  if (kind == Kind::Beta) {
    if (!(std::isfinite(a) && a > 0.0)) throw ConfigError(key + ".a", "must be > 0");
    if (!(std::isfinite(b) && b > 0.0)) throw ConfigError(key + ".b", "must be > 0");
  }
}

std::string Distribution::describe() const {
  if (kind == Kind::Uniform) return "Uniform[0,1]";
  std::ostringstream os;
  os << "Beta(" << a << "," << b << ")";
  return os.str();
}

void PopulationSpec::validate() const {
  gamma.validate("population.gamma");
  theta.validate("population.theta");
  r.validate("population.r");
  psi.validate("population.psi");
}

double sample(const Distribution& dist, const StreamKey& key) {
  return dist.quantile(uniform01(key));
}

UserType sample_user(const PopulationSpec& spec, std::uint64_t seed, std::uint64_t user_id) {
  return {sample(spec.gamma, {seed, user_id, 0, Purpose::TypeGamma, 0}),
          sample(spec.theta, {seed, user_id, 0, Purpose::TypeTheta, 0})};
}

QueryDraw sample_query(const PopulationSpec& spec, std::uint64_t seed, std::uint64_t user_id,
                       std::uint64_t period) {
  return {sample(spec.r, {seed, user_id, period, Purpose::QueryR, 0}),
          sample(spec.psi, {seed, user_id, period, Purpose::QueryPsi, 0})};
}

}  // namespace gemdp
