#include "gemdp/statics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "gemdp/csv.hpp"
#include "gemdp/errors.hpp"
#include "gemdp/parallel.hpp"

namespace gemdp {

std::string_view to_string(SweepParam p) {
  switch (p) {
    case SweepParam::Omega: return "omega";
    case SweepParam::Beta: return "beta";
    case SweepParam::KappaFree: return "kappa_free";
    case SweepParam::KappaPaid: return "kappa_paid";
    case SweepParam::Price: return "price";
    case SweepParam::Gamma: return "gamma";
    case SweepParam::Psi: return "psi";
    case SweepParam::R: return "r";
  }
  return "?";
}

SweepParam sweep_param_from_string(std::string_view name) {
  for (SweepParam p : {SweepParam::Omega, SweepParam::Beta, SweepParam::KappaFree,
                       SweepParam::KappaPaid, SweepParam::Price, SweepParam::Gamma,
                       SweepParam::Psi, SweepParam::R}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("sweep.param", "unknown parameter \"" + std::string(name) +
                                       "\" (expected omega, beta, kappa_free, kappa_paid, "
                                       "price, gamma, psi or r)");
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Verified: return "verified";
    case Verdict::Violated: return "violated";
    case Verdict::PreconditionUnmet: return "precondition unmet";
  }
  return "?";
}

std::string_view to_string(CutoffAxis a) {
  switch (a) {
    case CutoffAxis::Gamma: return "gamma";
    case CutoffAxis::Psi: return "psi";
    case CutoffAxis::R: return "r";
  }
  return "?";
}

namespace {

MarketParams main_text(MarketParams m) {
  m.payoff_convention = PayoffConvention::MainText;
  return m;
}

void check_anchor(const Anchor& a, const MarketParams& m) {
  if (a.state.subscribed) throw std::invalid_argument("anchor state must be pre-subscription");
  if (a.state.s < 0 || a.state.s > m.grid.s_max || a.state.c < 0 || a.state.c > m.grid.c_max) {
    throw std::invalid_argument("anchor state lies outside the grid");
  }
  a.user.validate();
  a.query.validate();
}

std::string fmt(double v) { return format_real(v); }

}  // namespace

EdgeReport anchor_edge(const MarketParams& market, const PopulationSpec& population,
                       const Anchor& anchor, const SolveOptions& options) {
  market.validate();
  check_anchor(anchor, market);
  const TrueModel model(market, anchor.user);
  const ValueTable v = value_iterate(model, QueryPanel::for_market(market, population), options);
  return q_edge(model, v, anchor.state, anchor.query);
}

OneStepReport one_step_region(const MarketParams& params, const UserType& user,
                              const UserState& state, const QueryDraw& query) {
  OneStepReport r;
  if (state.subscribed) {
    r.unmet.push_back("state is already subscribed");
    return r;
  }
  r.cutoff = conversion_cutoff(params, user, state.c);
  r.increment = experience_increment(params, query.psi);
  r.ad_cutoff = conversion_cutoff(params, user, std::min(state.c + 1, params.grid.c_max));
  r.free_engage = engage_prob(params, user, query, state, Action::Free);
  const int reached = std::min(state.s + r.increment, params.grid.s_max);
  if (state.s >= r.cutoff) r.unmet.push_back("state is already at or above the conversion cutoff");
  if (reached < r.cutoff) {
    r.unmet.push_back("one engaged free answer does not reach the cutoff (s=" +
                      std::to_string(state.s) + ", gain " + std::to_string(r.increment) +
                      ", cutoff " + std::to_string(r.cutoff) + ")");
  }
  if (state.s >= r.ad_cutoff) r.unmet.push_back("an engaged ad answer converts the user");
  if (r.free_engage < 1.0 - 1e-9) {
    r.unmet.push_back("engagement clause unmet (P(engage|Free) = " + fmt(r.free_engage) + ")");
  }
  r.holds = r.unmet.empty();
  return r;
}

// ---------------------------------------------------------------------------

namespace {

bool expect_decreasing(SweepParam p) {
  return !(p == SweepParam::KappaPaid || p == SweepParam::R);
}

void set_param(SweepParam p, double x, MarketParams& m, Anchor& a) {
  switch (p) {
    case SweepParam::Omega: m.omega = x; break;
    case SweepParam::Beta: m.beta = x; break;
    case SweepParam::KappaFree: m.kappa_free = x; break;
    case SweepParam::KappaPaid: m.kappa_paid = x; break;
    case SweepParam::Price: m.price = x; break;
    case SweepParam::Gamma: a.user.gamma = x; break;
    case SweepParam::Psi: a.query.psi = x; break;
    case SweepParam::R: a.query.r = x; break;
  }
}

// Index of the first adjacent pair that breaks the direction, or npos.
std::size_t first_break(const std::vector<double>& ys, bool decreasing, double slack) {
  for (std::size_t k = 0; k + 1 < ys.size(); ++k) {
    const bool bad = decreasing ? ys[k + 1] > ys[k] + slack : ys[k + 1] < ys[k] - slack;
    if (bad) return k;
  }
  return std::string::npos;
}

}  // namespace

SweepResult sweep_scalar(const SweepSpec& spec, const SolveOptions& options, int threads) {
  const std::string key = "sweep.grid";
  if (spec.grid.size() < 2) throw ConfigError(key, "needs at least two values");
  for (std::size_t k = 0; k + 1 < spec.grid.size(); ++k) {
    if (!(spec.grid[k] < spec.grid[k + 1])) throw ConfigError(key, "must be strictly increasing");
  }
  const MarketParams base = main_text(spec.market);
  check_anchor(spec.anchor, base);

  std::vector<MarketParams> markets(spec.grid.size(), base);
  std::vector<Anchor> anchors(spec.grid.size(), spec.anchor);
  for (std::size_t k = 0; k < spec.grid.size(); ++k) {
    set_param(spec.param, spec.grid[k], markets[k], anchors[k]);
    markets[k].validate();
    anchors[k].user.validate();
    anchors[k].query.validate();
  }
  const bool cost_or_price = spec.param == SweepParam::KappaFree ||
                             spec.param == SweepParam::KappaPaid || spec.param == SweepParam::Price;
  if (cost_or_price) {
    for (std::size_t k = 0; k < spec.grid.size(); ++k) {
      const OneStepReport os =
          one_step_region(markets[k], anchors[k].user, anchors[k].state, anchors[k].query);
      if (!os.holds) {
        std::string why;
        for (const auto& u : os.unmet) why += (why.empty() ? "" : "; ") + u;
        throw std::invalid_argument("anchor is outside the one-step conversion region at " +
                                    std::string(to_string(spec.param)) + "=" +
                                    fmt(spec.grid[k]) + ": " + why);
      }
    }
  }

  SweepResult out;
  out.param = spec.param;
  const bool decreasing = expect_decreasing(spec.param);
  out.direction = decreasing ? "decreasing" : "increasing";
  out.points.resize(spec.grid.size());
  parallel_for(spec.grid.size(), threads, [&](std::size_t k) {
    SweepPoint& p = out.points[k];
    p.value = spec.grid[k];
    p.edge = anchor_edge(markets[k], spec.population, anchors[k], options);
    p.free_continuation = -p.edge.long_term / markets[k].beta;
  });

  // The beta and omega propositions rest on a checkable clause about the
  // continuation advantage of Free; it decides between "violated" and
  // "precondition unmet" when the edge moves the wrong way.
  std::string precondition_gap;
  if (spec.param == SweepParam::Beta || spec.param == SweepParam::Omega) {
    std::vector<double> phi;
    for (const auto& p : out.points) phi.push_back(p.free_continuation);
    const std::size_t drop = first_break(phi, false, kSweepSlack);
    const auto neg = std::find_if(phi.begin(), phi.end(), [](double v) { return v < -kSweepSlack; });
    std::ostringstream os;
    if (spec.param == SweepParam::Beta && neg != phi.end()) {
      os << "continuation advantage of Free is negative (" << fmt(*neg) << ") at beta="
         << fmt(out.points[static_cast<std::size_t>(neg - phi.begin())].value);
    } else if (drop != std::string::npos) {
      os << "continuation advantage of Free falls from " << fmt(phi[drop]) << " to "
         << fmt(phi[drop + 1]) << " between " << to_string(spec.param) << "="
         << fmt(out.points[drop].value) << " and " << fmt(out.points[drop + 1].value);
    }
    precondition_gap = os.str();
  }

  std::vector<double> deltas;
  for (const auto& p : out.points) deltas.push_back(p.edge.delta);
  const std::size_t k = first_break(deltas, decreasing, kSweepSlack);
  if (k == std::string::npos) {
    if (!precondition_gap.empty()) {
      out.detail = "edge " + out.direction + " although the precondition fails: " + precondition_gap;
    }
    return out;
  }
  std::ostringstream os;
  os << "edge not " << out.direction << ": " << fmt(deltas[k]) << " at " << to_string(spec.param)
     << "=" << fmt(spec.grid[k]) << " then " << fmt(deltas[k + 1]) << " at "
     << fmt(spec.grid[k + 1]);
  if (precondition_gap.empty()) {
    out.verdict = Verdict::Violated;
    out.detail = os.str();
  } else {
    out.verdict = Verdict::PreconditionUnmet;
    out.detail = precondition_gap + " (" + os.str() + ")";
  }
  return out;
}

void write_sweep_csv(std::ostream& os, const SweepResult& result) {
  CsvWriter csv(os, {"parameter_value", "delta", "short", "long", "verdict"});
  const std::string verdict(to_string(result.verdict));
  for (const auto& p : result.points) {
    csv.row(p.value, p.edge.delta, p.edge.short_term, p.edge.long_term, verdict);
  }
}

// ---------------------------------------------------------------------------

CutoffResult find_cutoff(CutoffAxis axis, const MarketParams& market,
                         const PopulationSpec& population, const Anchor& anchor, double lo,
                         double hi, int prescan, double width, const SolveOptions& options) {
  if (!(lo < hi)) throw std::invalid_argument("find_cutoff: empty search interval");
  if (prescan < 3) throw std::invalid_argument("find_cutoff: pre-scan needs >= 3 points");
  if (!(width > 0.0)) throw std::invalid_argument("find_cutoff: width must be > 0");
  const MarketParams mk = main_text(market);
  mk.validate();
  check_anchor(anchor, mk);

  CutoffResult out;
  out.axis = axis;
  const QueryPanel panel = QueryPanel::for_market(mk, population);

  std::function<double(double)> edge;
  std::optional<TrueModel> fixed_model;
  std::optional<ValueTable> fixed_table;
  if (axis == CutoffAxis::Gamma) {
    edge = [&](double x) {
      UserType u = anchor.user;
      u.gamma = x;
      const TrueModel model(mk, u);
      return q_edge(model, value_iterate(model, panel, options), anchor.state, anchor.query).delta;
    };
  } else {
    fixed_model.emplace(mk, anchor.user);
    fixed_table = value_iterate(*fixed_model, panel, options);
    edge = [&](double x) {
      QueryDraw q = anchor.query;
      (axis == CutoffAxis::Psi ? q.psi : q.r) = x;
      return q_edge(*fixed_model, *fixed_table, anchor.state, q).delta;
    };
  }

  // Ad sits at the low end of the axis for gamma and psi, at the high end for r.
  const bool ad_low = axis != CutoffAxis::R;
  std::vector<double> xs;
  std::vector<bool> ad;
  for (int k = 0; k < prescan; ++k) {
    const double x = lo + (hi - lo) * k / (prescan - 1);
    const double d = edge(x);
    ++out.evaluations;
    out.scan.emplace_back(x, d);
    xs.push_back(x);
    ad.push_back(d >= 0.0);
  }
  std::size_t switches = 0;
  for (std::size_t k = 0; k + 1 < ad.size(); ++k) {
    if (ad[k] != ad[k + 1]) {
      ++switches;
      const bool expected = ad_low ? (ad[k] && !ad[k + 1]) : (!ad[k] && ad[k + 1]);
      if (!expected || switches > 1) {
        out.verdict = Verdict::Violated;
        out.detail = "sign pattern on the pre-scan is not a single threshold of the expected "
                     "orientation (switch between " + fmt(xs[k]) + " and " + fmt(xs[k + 1]) + ")";
        return out;
      }
    }
  }
  const double inf = std::numeric_limits<double>::infinity();
  if (switches == 0) {
    out.lo = lo;
    out.hi = hi;
    const bool all_ad = ad.front();
    out.cutoff = (all_ad == ad_low) ? inf : -inf;
    out.detail = all_ad ? "Ad on the whole interval" : "Free on the whole interval";
    return out;
  }
  std::size_t k = 0;
  while (ad[k] == ad[k + 1]) ++k;
  double a = xs[k];
  double b = xs[k + 1];
  const bool left_ad = ad[k];
  while (b - a > width) {
    const double mid = 0.5 * (a + b);
    const bool mid_ad = edge(mid) >= 0.0;
    ++out.evaluations;
    (mid_ad == left_ad ? a : b) = mid;
  }
  out.lo = a;
  out.hi = b;
  out.cutoff = 0.5 * (a + b);
  return out;
}

std::size_t CutoffMap::ad_cells() const {
  return static_cast<std::size_t>(std::count(actions.begin(), actions.end(), Action::Ad));
}

CutoffMap cutoff_map(MapPlane plane, const MarketParams& market, const PopulationSpec& population,
                     const Anchor& anchor, int resolution, const SolveOptions& options,
                     int threads) {
  if (resolution < 1 || resolution > 64) {
    throw ConfigError("cutoff.resolution", "must lie in [1, 64]");
  }
  const MarketParams mk = main_text(market);
  mk.validate();
  check_anchor(anchor, mk);
  const QueryPanel panel = QueryPanel::for_market(mk, population);

  CutoffMap map;
  map.plane = plane;
  map.resolution = resolution;
  for (int i = 0; i < resolution; ++i) map.centers.push_back((i + 0.5) / resolution);
  const auto n = static_cast<std::size_t>(resolution);
  map.actions.assign(n * n, Action::Ad);
  map.deltas.assign(n * n, 0.0);
  map.free_continuation.assign(n * n, 0.0);
  parallel_for(n, threads, [&](std::size_t i) {
    UserType u = anchor.user;
    u.gamma = map.centers[i];
    const TrueModel model(mk, u);
    const ValueTable v = value_iterate(model, panel, options);
    for (std::size_t j = 0; j < n; ++j) {
      QueryDraw q = anchor.query;
      (plane == MapPlane::GammaPsi ? q.psi : q.r) = map.centers[j];
      const EdgeReport e = q_edge(model, v, anchor.state, q);
      map.deltas[i * n + j] = e.delta;
      map.free_continuation[i * n + j] = -e.long_term / mk.beta;
      map.actions[i * n + j] = optimal_action(e);
    }
  });
  return map;
}

MapCheck check_gamma_monotone(const CutoffMap& map) {
  for (int j = 0; j < map.resolution; ++j) {
    bool seen_free = false;
    for (int i = 0; i < map.resolution; ++i) {
      if (map.at(i, j) == Action::Free) {
        seen_free = true;
      } else if (seen_free) {
        return {Verdict::Violated, "Ad reappears at gamma=" + fmt(map.centers[i]) +
                                       " after Free in column " + fmt(map.centers[j])};
      }
    }
  }
  return {};
}

MapCheck check_ad_region_shrinks(const CutoffMap& low, const CutoffMap& high) {
  if (low.resolution != high.resolution || low.plane != high.plane) {
    throw std::invalid_argument("check_ad_region_shrinks: maps differ in shape");
  }
  MapCheck out;
  int unmet = 0;
  for (int i = 0; i < low.resolution; ++i) {
    for (int j = 0; j < low.resolution; ++j) {
      if (!(high.at(i, j) == Action::Ad && low.at(i, j) == Action::Free)) continue;
      const auto k = static_cast<std::size_t>(i * low.resolution + j);
      const std::string cell = "(" + fmt(low.centers[static_cast<std::size_t>(i)]) + ", " +
                               fmt(low.centers[static_cast<std::size_t>(j)]) + ")";
      if (high.free_continuation[k] >= low.free_continuation[k] - kSweepSlack) {
        return {Verdict::Violated, "cell " + cell + " turns Ad under the stronger outside option "
                                   "although the continuation advantage of Free did not fall"};
      }
      if (unmet++ == 0) {
        out.detail = "cell " + cell + " turns Ad; the continuation advantage of Free falls there (" +
                     fmt(low.free_continuation[k]) + " -> " + fmt(high.free_continuation[k]) + ")";
      }
    }
  }
  if (unmet > 0) {
    out.verdict = Verdict::PreconditionUnmet;
    out.detail = std::to_string(unmet) + " cell(s) turn Ad; first: " + out.detail;
  }
  return out;
}

namespace {

EdgeReport edge_on_axis(CutoffAxis axis, const MarketParams& mk, const PopulationSpec& population,
                        const Anchor& anchor, double x, const SolveOptions& options) {
  Anchor a = anchor;
  if (axis == CutoffAxis::Gamma) a.user.gamma = x;
  if (axis == CutoffAxis::Psi) a.query.psi = x;
  if (axis == CutoffAxis::R) a.query.r = x;
  return anchor_edge(mk, population, a, options);
}

}  // namespace

CutoffShift cutoff_shift(CutoffAxis axis, const MarketParams& market,
                         const PopulationSpec& population, const Anchor& anchor, double omega_low,
                         double omega_high, const SolveOptions& options) {
  if (!(omega_low < omega_high)) {
    throw ConfigError("cutoff.omegas", "must be two increasing values");
  }
  MarketParams lo_mk = main_text(market);
  MarketParams hi_mk = lo_mk;
  lo_mk.omega = omega_low;
  hi_mk.omega = omega_high;
  CutoffShift out;
  out.low = find_cutoff(axis, lo_mk, population, anchor, 0.0, 1.0, 17, 1e-3, options);
  out.high = find_cutoff(axis, hi_mk, population, anchor, 0.0, 1.0, 17, 1e-3, options);
  for (const CutoffResult* r : {&out.low, &out.high}) {
    if (r->verdict != Verdict::Verified) {
      out.verdict = r->verdict;
      out.detail = "no single threshold: " + r->detail;
      return out;
    }
  }
  const bool ad_low = axis != CutoffAxis::R;
  const double a = out.low.cutoff;
  const double b = out.high.cutoff;
  const bool shrinks = ad_low ? b <= a + kSweepSlack : b >= a - kSweepSlack;
  if (shrinks) return out;

  // Find a probe that is Ad only under the stronger outside option.
  double x = std::numeric_limits<double>::quiet_NaN();
  if (std::isfinite(a) && std::isfinite(b)) {
    x = 0.5 * (a + b);
  } else {
    for (std::size_t k = 0; k < out.high.scan.size(); ++k) {
      if (out.high.scan[k].second >= 0.0 && out.low.scan[k].second < 0.0) {
        x = out.high.scan[k].first;
        break;
      }
    }
  }
  std::ostringstream os;
  os << to_string(axis) << "* moves from " << fmt(a) << " to " << fmt(b)
     << " as omega rises, enlarging the Ad side";
  if (std::isnan(x)) {
    out.verdict = Verdict::Violated;
    out.detail = os.str();
    return out;
  }
  const EdgeReport e_lo = edge_on_axis(axis, lo_mk, population, anchor, x, options);
  const EdgeReport e_hi = edge_on_axis(axis, hi_mk, population, anchor, x, options);
  const double phi_lo = -e_lo.long_term / lo_mk.beta;
  const double phi_hi = -e_hi.long_term / hi_mk.beta;
  os << "; at " << to_string(axis) << "=" << fmt(x) << " the continuation advantage of Free goes "
     << fmt(phi_lo) << " -> " << fmt(phi_hi);
  out.verdict = phi_hi < phi_lo - kSweepSlack ? Verdict::PreconditionUnmet : Verdict::Violated;
  out.detail = os.str();
  return out;
}

void write_cutoff_map_csv(std::ostream& os, const CutoffMap& map) {
  CsvWriter csv(os, {"gamma", map.plane == MapPlane::GammaPsi ? "psi" : "r", "action", "delta"});
  for (int i = 0; i < map.resolution; ++i) {
    for (int j = 0; j < map.resolution; ++j) {
      csv.row(map.centers[static_cast<std::size_t>(i)], map.centers[static_cast<std::size_t>(j)],
              to_string(map.at(i, j)),
              map.deltas[static_cast<std::size_t>(i * map.resolution + j)]);
    }
  }
}

}  // namespace gemdp
