#pragma once

#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "gemdp/dp.hpp"

namespace gemdp {

enum class SweepParam { Omega, Beta, KappaFree, KappaPaid, Price, Gamma, Psi, R };

std::string_view to_string(SweepParam p);
SweepParam sweep_param_from_string(std::string_view name);

/// Outcome of a checked comparative static. `PreconditionUnmet` means the
/// proposition's assumption failed at the anchor, so nothing was claimed.
enum class Verdict { Verified, Violated, PreconditionUnmet };

std::string_view to_string(Verdict v);

/// A fixed decision point.
struct Anchor {
  UserType user;
  UserState state;
  QueryDraw query;
};

/// Solves for the anchor's type (with the query panel of `market`) and
/// returns the edge at the anchor.
EdgeReport anchor_edge(const MarketParams& market, const PopulationSpec& population,
                       const Anchor& anchor, const SolveOptions& options = {});

struct OneStepReport {
  bool holds = false;
  int cutoff = 0;              // ceil(tau) at the current exposure
  int increment = 0;           // experience gain of an engaged free answer
  int ad_cutoff = 0;           // ceil(tau) after an engaged ad answer
  double free_engage = 0.0;    // P(engage | Free)
  std::vector<std::string> unmet;
};

/// Whether a single engaged free answer converts the user while an ad answer
/// does not, with free engagement certain up to 1e-9.
OneStepReport one_step_region(const MarketParams& params, const UserType& user,
                              const UserState& state, const QueryDraw& query);

struct SweepSpec {
  SweepParam param = SweepParam::Omega;
  std::vector<double> grid;
  Anchor anchor;
  MarketParams market;
  PopulationSpec population;
};

struct SweepPoint {
  double value = 0.0;
  EdgeReport edge;
  /// Continuation advantage of Free over Ad (beta sweeps).
  double free_continuation = 0.0;
};

struct SweepResult {
  SweepParam param = SweepParam::Omega;
  std::string direction;  // "decreasing" or "increasing"
  std::vector<SweepPoint> points;
  Verdict verdict = Verdict::Verified;
  std::string detail;
};

inline constexpr double kSweepSlack = 1e-6;

/// Edge along `spec.grid` under the MainText convention, with one solve per
/// grid value, checked against the proposition's direction. Throws
/// std::invalid_argument for a bad grid or, for cost and price sweeps, an
/// anchor outside the one-step conversion region.
SweepResult sweep_scalar(const SweepSpec& spec, const SolveOptions& options = {}, int threads = 1);

void write_sweep_csv(std::ostream& os, const SweepResult& result);

// ---------------------------------------------------------------------------
// Type cutoffs

enum class CutoffAxis { Gamma, Psi, R };

std::string_view to_string(CutoffAxis a);

struct CutoffResult {
  CutoffAxis axis = CutoffAxis::Gamma;
  /// +-infinity when the sign never changes on the interval.
  double cutoff = std::numeric_limits<double>::quiet_NaN();
  double lo = 0.0;
  double hi = 0.0;
  int evaluations = 0;
  Verdict verdict = Verdict::Verified;
  std::vector<std::pair<double, double>> scan;  // (axis value, edge)
  std::string detail;
};

/// Ad is expected for gamma <= cutoff, psi <= cutoff and r >= cutoff. A
/// `prescan`-point scan checks that pattern before bisecting to `width`.
CutoffResult find_cutoff(CutoffAxis axis, const MarketParams& market,
                         const PopulationSpec& population, const Anchor& anchor, double lo = 0.0,
                         double hi = 1.0, int prescan = 17, double width = 1e-3,
                         const SolveOptions& options = {});

enum class MapPlane { GammaPsi, GammaR };

struct CutoffMap {
  MapPlane plane = MapPlane::GammaPsi;
  int resolution = 0;
  std::vector<double> centers;  // shared by both axes
  std::vector<Action> actions;  // [i_gamma * resolution + j_other]
  std::vector<double> deltas;
  std::vector<double> free_continuation;  // continuation advantage of Free per cell

  Action at(int i, int j) const { return actions[static_cast<std::size_t>(i * resolution + j)]; }
  std::size_t ad_cells() const;
};

/// Optimal action on a resolution x resolution grid of cell centres. The
/// anchor supplies the state, theta and the fixed query coordinate.
CutoffMap cutoff_map(MapPlane plane, const MarketParams& market, const PopulationSpec& population,
                     const Anchor& anchor, int resolution, const SolveOptions& options = {},
                     int threads = 1);

struct MapCheck {
  Verdict verdict = Verdict::Verified;
  std::string detail;
};

/// Once Free along increasing gamma, Free for every larger gamma.
MapCheck check_gamma_monotone(const CutoffMap& map);
/// Every Ad cell of `high` (stronger outside option) is an Ad cell of `low`.
/// A cell that turns Ad only counts as a violation when the continuation
/// advantage of Free did not fall there; otherwise the verdict is
/// "precondition unmet".
MapCheck check_ad_region_shrinks(const CutoffMap& low, const CutoffMap& high);

struct CutoffShift {
  CutoffResult low;   // at omega_low
  CutoffResult high;  // at omega_high
  Verdict verdict = Verdict::Verified;
  std::string detail;
};

/// The Ad side of the axis weakly shrinks from omega_low to omega_high:
/// gamma* and psi* fall, r* rises.
CutoffShift cutoff_shift(CutoffAxis axis, const MarketParams& market,
                         const PopulationSpec& population, const Anchor& anchor, double omega_low,
                         double omega_high, const SolveOptions& options = {});

void write_cutoff_map_csv(std::ostream& os, const CutoffMap& map);

}  // namespace gemdp
