#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gemdp/dp.hpp"

namespace gemdp {

enum class BenefitKind { InclusiveValue, Zero, PerAction };

std::string_view to_string(BenefitKind k);
BenefitKind benefit_kind_from_string(std::string_view name);

struct WelfareParams {
  BenefitKind benefit = BenefitKind::InclusiveValue;
  double benefit_ad = 0.0;    // PerAction only
  double benefit_free = 0.0;  // PerAction only
  /// Subscribed welfare flow; the subscription margin when unset.
  std::optional<double> w_sub;
  /// Bounds; computed when unset, checked against the computed values when set.
  std::optional<double> u_max;
  std::optional<double> delta_sub_max;
};

/// log(exp(v) + exp(v_out)) - log 2, evaluated with a max shift.
double inclusive_value(double v, double v_out);

/// Per-query user benefit of facing display `action`.
double user_benefit(const WelfareParams& wp, const MarketParams& market, const UserType& user,
                    const QueryDraw& query, const UserState& state, Action action);

struct WelfareBounds {
  double w_sub = 0.0;
  double u_max = 0.0;
  double delta_sub_max = 0.0;
  double scanned_u_max = 0.0;  // max |benefit| found on the validation lattice
  double eps_sw = 0.0;         // max(u_max, delta_sub_max)
  double value_bound = 0.0;    // eps_sw / (1 - beta)
  double band = 0.0;           // 2 u_max + 2 beta eps_sw / (1 - beta)
};

/// Scans the benefit over an 11-point lattice in gamma, r and psi at every c
/// on the grid (the utilities are linear in each, so the corners are
/// included). Throws ConfigError("welfare.u_max") or
/// ConfigError("welfare.delta_sub_max") when a configured bound is too small.
WelfareBounds resolve_welfare_bounds(const WelfareParams& wp, const MarketParams& market);

/// Revenue model with flows r_a + u_user and subscribed flow w_sub.
class WelfareModel final : public DecisionModel {
public:
  WelfareModel(MarketParams params, UserType user, WelfareParams welfare);

  const MarketParams& market() const override { return base_.market(); }
  const UserType& user() const override { return base_.user(); }
  ActionTerms terms(const UserState& state, const QueryDraw& query, Action action) const override;
  double subscribed_flow() const override { return w_sub_; }

  const WelfareParams& welfare() const { return welfare_; }

private:
  TrueModel base_;
  WelfareParams welfare_;
  double w_sub_;
};

struct WelfareSolve {
  ValueTable values;
  std::vector<Action> decisions;  // sign rule on the welfare edge, ties to Ad
};

WelfareSolve welfare_solve(const WelfareModel& model, const QueryPanel& panel,
                           const SolveOptions& options = {});

struct AlignmentPoint {
  UserState state;
  QueryDraw query;
  double delta = 0.0;
  double delta_sw = 0.0;
  bool outside_band = false;
};

struct AlignmentReport {
  WelfareBounds bounds;
  double value_gap = 0.0;
  double edge_gap = 0.0;
  std::size_t points = 0;
  std::size_t margin_points = 0;  // |delta| outside the band
  std::size_t agreements = 0;     // of those, same action
  std::size_t total_agreements = 0;
  std::vector<AlignmentPoint> disagreements;
  bool value_ok = true, edge_ok = true, agreement_ok = true;
  std::string witness;

  bool ok() const { return value_ok && edge_ok && agreement_ok; }
};

/// Compares converged revenue and welfare tables on the same panel. `tol` is
/// the solver tolerance both tables were produced with.
AlignmentReport welfare_compare(const BellmanOperator& revenue_op, const ValueTable& revenue,
                                const BellmanOperator& welfare_op, const ValueTable& welfare,
                                const WelfareBounds& bounds, double tol);

/// Columns: s, c, r, psi, delta, delta_sw, action, action_sw, outside_band.
void write_disagreements_csv(std::ostream& os, std::span<const AlignmentPoint> points);

}  // namespace gemdp
