#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "gemdp/rng.hpp"

namespace gemdp {

enum class Action { Ad, Free };

/// How flow payoffs are booked. `MainText` charges the free-tier inference
/// cost on every display and adds ad revenue on engagement; `AppendixSim`
/// books nothing without engagement, -kappa_free for an engaged free answer
/// and the ad revenue for an engaged ad answer.
enum class PayoffConvention { MainText, AppendixSim };

std::string_view to_string(Action a);
std::string_view to_string(PayoffConvention c);
PayoffConvention payoff_convention_from_string(std::string_view name);

struct UtilityCoefficients {
  double w_psi = 0.0;
  double w_r_free = 0.0;
  double u0_ad = 0.0;
  double ur_ad = 0.0;
  double w_gamma = 0.0;
  double uc_ad = 0.0;
};

struct RevenueCoefficients {
  double b0 = 0.0;
  double b_r = 0.0;
  double b_c = 0.0;
  double b_s = 0.0;
};

struct RetentionCoefficients {
  double rho_min = 0.0;
  double alpha_s = 0.0;
  double alpha_c = 0.0;
};

struct ConversionCoefficients {
  double tau0 = 0.0;
  double tau_p = 0.0;
  double tau_theta = 0.0;
  double tau_c = 0.0;
};

struct GridCaps {
  int s_max = 1;
  int c_max = 1;
};

/// Scalar primitives of one market. Value-initialised fields are all zero;
/// calibrated defaults come from `default_market_params()` (config module).
struct MarketParams {
  double beta = 0.0;
  double price = 0.0;
  double kappa_free = 0.0;
  double kappa_paid = 0.0;
  double omega = 0.0;
  UtilityCoefficients utility;
  RevenueCoefficients revenue;
  RetentionCoefficients retention;
  ConversionCoefficients conversion;
  GridCaps grid;
  double psi_cut = 0.5;
  int n_q = 1;
  std::uint64_t panel_seed = 0;
  // |price - kappa_paid| must stay below this; finite-horizon checks rely on it.
  double reward_bound = 1e6;
  PayoffConvention payoff_convention = PayoffConvention::MainText;

  /// Throws ConfigError("market.<field>", rule) on the first violated constraint.
  void validate() const;

  double subscription_margin() const { return price - kappa_paid; }
};

struct UserType {
  double gamma = 0.0;  // ad sensitivity
  double theta = 0.0;  // reliance; lowers the conversion cutoff

  void validate() const;
  friend bool operator==(const UserType&, const UserType&) = default;
};

struct QueryDraw {
  double r = 0.0;    // ad profitability signal
  double psi = 0.0;  // AI-quality signal

  void validate() const;
  friend bool operator==(const QueryDraw&, const QueryDraw&) = default;
};

struct UserState {
  int s = 0;
  int c = 0;
  bool subscribed = false;
  bool active = true;

  friend bool operator==(const UserState&, const UserState&) = default;
};

struct Utilities {
  double v_free = 0.0;
  double v_ad = 0.0;
  double v_out = 0.0;
};

Utilities utilities(const MarketParams& params, const UserType& user, const QueryDraw& query,
                    const UserState& state);

/// exp(v) / (exp(v) + exp(v_out)), evaluated with a max shift.
double logit_share(double v, double v_out);

double engage_prob(const MarketParams& params, const UserType& user, const QueryDraw& query,
                   const UserState& state, Action action);

/// Ad revenue conditional on engagement, max{b0 + b_r r - b_c c - b_s s, 0}.
double conditional_ad_revenue(const MarketParams& params, const QueryDraw& query,
                              const UserState& state);

/// Realised one-period payoff of a pre-subscription display.
/// Throws std::invalid_argument for subscribed states.
double flow_payoff(const MarketParams& params, const UserType& user, const QueryDraw& query,
                   const UserState& state, Action action, bool engaged);

/// Engagement-weighted flow payoff (exact two-point expectation).
double expected_flow(const MarketParams& params, const UserType& user, const QueryDraw& query,
                     const UserState& state, Action action);

/// Experience gain of an engaged ad-free answer: 1 + [psi >= psi_cut].
int experience_increment(const MarketParams& params, double psi);

/// Post-display (s, c) update. Subscription status is left for
/// `conversion_update`. Throws std::invalid_argument for subscribed states.
UserState transition(const MarketParams& params, const QueryDraw& query, const UserState& state,
                     Action action, bool engaged);

/// Real-valued cutoff tau(theta, p, c) = tau0 + tau_p p - tau_theta theta - tau_c c.
double conversion_threshold(const MarketParams& params, const UserType& user, int c);

/// Integer experience level that triggers conversion, ceil(tau).
int conversion_cutoff(const MarketParams& params, const UserType& user, int c);

/// Subscription is absorbing; a converted user is active.
UserState conversion_update(const MarketParams& params, const UserType& user,
                            const UserState& state);

/// rho_min + (1 - rho_min) sigma(alpha_s s - alpha_c c); 1 for subscribers.
double retention_prob(const MarketParams& params, const UserState& state);

// ---------------------------------------------------------------------------
// Population sampling

struct Distribution {
  enum class Kind { Uniform, Beta };

  Kind kind = Kind::Uniform;
  double a = 1.0;
  double b = 1.0;

  static Distribution uniform() { return {}; }
  static Distribution beta(double a, double b);

  /// Inverse CDF at u in (0,1); always lands in [0,1].
  double quantile(double u) const;
  double mean() const;
  void validate(const std::string& key) const;
  std::string describe() const;
};

struct PopulationSpec {
  Distribution gamma;
  Distribution theta;
  Distribution r;
  Distribution psi;

  void validate() const;
};

/// One draw from `dist` at `key`. Identical keys give identical samples.
double sample(const Distribution& dist, const StreamKey& key);

UserType sample_user(const PopulationSpec& spec, std::uint64_t seed, std::uint64_t user_id);
QueryDraw sample_query(const PopulationSpec& spec, std::uint64_t seed, std::uint64_t user_id,
                       std::uint64_t period);

}  // namespace gemdp
