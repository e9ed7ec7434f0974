#include "gemdp/welfare.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "gemdp/csv.hpp"
#include "gemdp/errors.hpp"

namespace gemdp {

std::string_view to_string(BenefitKind k) {
  switch (k) {
    case BenefitKind::InclusiveValue: return "inclusive_value";
    case BenefitKind::Zero: return "zero";
    case BenefitKind::PerAction: return "per_action";
  }
  return "";
}

BenefitKind benefit_kind_from_string(std::string_view name) {
  if (name == "inclusive_value") return BenefitKind::InclusiveValue;
  if (name == "zero") return BenefitKind::Zero;
  if (name == "per_action") return BenefitKind::PerAction;
  throw ConfigError("welfare.benefit", "must be \"inclusive_value\", \"zero\" or \"per_action\", got \"" +
                                           std::string(name) + "\"");
}

double inclusive_value(double v, double v_out) {
  const double hi = std::max(v, v_out);
  return hi + std::log(std::exp(v - hi) + std::exp(v_out - hi)) - std::log(2.0);
}

double user_benefit(const WelfareParams& wp, const MarketParams& market, const UserType& user,
                    const QueryDraw& query, const UserState& state, Action action) {
  switch (wp.benefit) {
    case BenefitKind::Zero:
      return 0.0;
    case BenefitKind::PerAction:
      return action == Action::Ad ? wp.benefit_ad : wp.benefit_free;
    case BenefitKind::InclusiveValue: {
      const Utilities u = utilities(market, user, query, state);
      return inclusive_value(action == Action::Ad ? u.v_ad : u.v_free, u.v_out);
    }
  }
  return 0.0;
}

WelfareBounds resolve_welfare_bounds(const WelfareParams& wp, const MarketParams& market) {
  market.validate();
  for (auto [v, key] : {std::pair{wp.benefit_ad, "welfare.benefit_ad"},
                        {wp.benefit_free, "welfare.benefit_free"}}) {
    if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
  }
  WelfareBounds b;
  b.w_sub = wp.w_sub.value_or(market.subscription_margin());
  if (!std::isfinite(b.w_sub)) throw ConfigError("welfare.w_sub", "must be finite");

  constexpr int kLattice = 10;
  for (int ig = 0; ig <= kLattice; ++ig) {
    for (int ir = 0; ir <= kLattice; ++ir) {
      for (int ip = 0; ip <= kLattice; ++ip) {
        const UserType user{ig / double(kLattice), 0.5};
        const QueryDraw q{ir / double(kLattice), ip / double(kLattice)};
        for (int c = 0; c <= market.grid.c_max; ++c) {
          const UserState st{0, c, false, true};
          for (Action a : {Action::Ad, Action::Free}) {
            b.scanned_u_max =
                std::max(b.scanned_u_max, std::abs(user_benefit(wp, market, user, q, st, a)));
          }
        }
      }
    }
  }
  if (wp.u_max) {
    if (!(*wp.u_max >= b.scanned_u_max)) {
      std::ostringstream os;
      os << "must be >= the scanned benefit bound " << b.scanned_u_max;
      throw ConfigError("welfare.u_max", os.str());
    }
    b.u_max = *wp.u_max;
  } else {
    b.u_max = b.scanned_u_max;
  }
  const double sub_gap = std::abs(b.w_sub - market.subscription_margin());
  if (wp.delta_sub_max) {
    if (!(*wp.delta_sub_max >= sub_gap)) {
      std::ostringstream os;
      os << "must be >= |w_sub - (price - kappa_paid)| = " << sub_gap;
      throw ConfigError("welfare.delta_sub_max", os.str());
    }
    b.delta_sub_max = *wp.delta_sub_max;
  } else {
    b.delta_sub_max = sub_gap;
  }
  const double beta = market.beta;
  b.eps_sw = std::max(b.u_max, b.delta_sub_max);
  b.value_bound = b.eps_sw / (1.0 - beta);
  b.band = 2.0 * b.u_max + 2.0 * beta * b.eps_sw / (1.0 - beta);
  return b;
}

WelfareModel::WelfareModel(MarketParams params, UserType user, WelfareParams welfare)
    : base_(std::move(params), user),
      welfare_(std::move(welfare)),
      w_sub_(welfare_.w_sub.value_or(base_.market().subscription_margin())) {}

ActionTerms WelfareModel::terms(const UserState& state, const QueryDraw& query,
                                Action action) const {
  ActionTerms t = base_.terms(state, query, action);
  t.flow += user_benefit(welfare_, base_.market(), base_.user(), query, state, action);
  return t;
}

WelfareSolve welfare_solve(const WelfareModel& model, const QueryPanel& panel,
                           const SolveOptions& options) {
  const BellmanOperator op(model, panel);
  WelfareSolve out;
  out.values = value_iterate(op, options);
  out.decisions = op.greedy_decisions(out.values);
  return out;
}

AlignmentReport welfare_compare(const BellmanOperator& revenue_op, const ValueTable& revenue,
                                const BellmanOperator& welfare_op, const ValueTable& welfare,
                                const WelfareBounds& bounds, double tol) {
  if (!(revenue_op.grid() == welfare_op.grid()) ||
      revenue_op.panel().size() != welfare_op.panel().size() ||
      revenue_op.beta() != welfare_op.beta()) {
    throw std::invalid_argument("welfare_compare: operators differ in grid, panel or beta");
  }
  const double beta = revenue_op.beta();
  const double slack = 4.0 * tol / (1.0 - beta) + 1e-12;
  AlignmentReport rep;
  rep.bounds = bounds;
  rep.value_gap = sup_distance(revenue, welfare);
  rep.value_ok = rep.value_gap <= bounds.value_bound + slack;
  if (!rep.value_ok) {
    std::ostringstream os;
    os << "value gap " << rep.value_gap << " > " << bounds.value_bound << "; ";
    rep.witness += os.str();
  }
  const StateGrid& grid = revenue_op.grid();
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    const UserState st = grid.state(cell);
    for (std::size_t j = 0; j < revenue_op.panel().size(); ++j) {
      const auto q = revenue_op.action_values(cell, j, revenue);
      const auto w = welfare_op.action_values(cell, j, welfare);
      AlignmentPoint pt{st, revenue_op.panel().draw(j), q[0] - q[1], w[0] - w[1], false};
      ++rep.points;
      const double gap = std::abs(pt.delta - pt.delta_sw);
      rep.edge_gap = std::max(rep.edge_gap, gap);
      if (gap > bounds.band + slack && rep.edge_ok) {
        rep.edge_ok = false;
        std::ostringstream os;
        os << "edge gap " << gap << " > " << bounds.band << " at s=" << st.s << " c=" << st.c
           << " query " << j << "; ";
        rep.witness += os.str();
      }
      pt.outside_band = std::abs(pt.delta) > bounds.band + slack;
      const bool same = (pt.delta >= 0.0) == (pt.delta_sw >= 0.0);
      if (pt.outside_band) ++rep.margin_points;
      if (same) {
        ++rep.total_agreements;
        if (pt.outside_band) ++rep.agreements;
        continue;
      }
      if (pt.outside_band && rep.agreement_ok) {
        rep.agreement_ok = false;
        std::ostringstream os;
        os << "actions differ outside the band at s=" << st.s << " c=" << st.c << " query " << j
           << "; ";
        rep.witness += os.str();
      }
      rep.disagreements.push_back(pt);
    }
  }
  return rep;
}

void write_disagreements_csv(std::ostream& os, std::span<const AlignmentPoint> points) {
  CsvWriter w(os, {"s", "c", "r", "psi", "delta", "delta_sw", "action", "action_sw",
                   "outside_band"});
  for (const auto& p : points) {
    w.row(p.state.s, p.state.c, p.query.r, p.query.psi, p.delta, p.delta_sw,
          to_string(p.delta >= 0.0 ? Action::Ad : Action::Free),
          to_string(p.delta_sw >= 0.0 ? Action::Ad : Action::Free), p.outside_band);
  }
}

}  // namespace gemdp
