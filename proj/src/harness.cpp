#include "gemdp/harness.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <boost/version.hpp>

#include "gemdp/csv.hpp"
#include "gemdp/errors.hpp"
#include "gemdp/parallel.hpp"

#ifndef GEMDP_VERSION
#define GEMDP_VERSION "0.0.0"
#endif

namespace gemdp {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Solve: return "solve";
    case Command::Simulate: return "simulate";
    case Command::Compare: return "compare";
    case Command::Ablate: return "ablate";
    case Command::Sweep: return "sweep";
    case Command::Cutoff: return "cutoff";
    case Command::Learn: return "learn";
    case Command::Welfare: return "welfare";
  }
  return "";
}

Command command_from_string(std::string_view name) {
  for (Command c : {Command::Solve, Command::Simulate, Command::Compare, Command::Ablate,
                    Command::Sweep, Command::Cutoff, Command::Learn, Command::Welfare}) {
    if (to_string(c) == name) return c;
  }
  throw ConfigError("command", "unknown command \"" + std::string(name) + "\"");
}

fs::path default_output_dir(Command command) {
  const char* root = std::getenv("GEMDP_OUT_ROOT");
  const fs::path base = (root != nullptr && *root != '\0') ? fs::path(root) : fs::path("runs");
  return base / std::string(to_string(command));
}

namespace {

class Outputs {
public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    std::ofstream os(dir_ / name, std::ios::binary);
    if (!os) throw std::runtime_error("cannot create " + (dir_ / name).string());
    body(os);
    os.flush();
    if (!os) throw std::runtime_error("write failed for " + (dir_ / name).string());
    files.push_back(name);
  }

  std::vector<std::string> files;

private:
  fs::path dir_;
};

void verdict(CommandResult& res, const std::string& check, Verdict v, std::ostream& log,
             const std::string& detail = {}) {
  res.verdicts.emplace_back(check, std::string(to_string(v)));
  if (v == Verdict::Violated) res.exit_code = kExitViolation;
  log << "  " << check << ": " << to_string(v);
  if (!detail.empty()) log << " (" << detail << ")";
  log << "\n";
}

void pass_fail(CommandResult& res, const std::string& check, bool ok, std::ostream& log,
               const std::string& detail = {}) {
  verdict(res, check, ok ? Verdict::Verified : Verdict::Violated, log, detail);
}

std::vector<UserType> union_of_cohorts(const SimConfig& sim, std::span<const std::uint64_t> seeds) {
  std::vector<UserType> users;
  for (std::uint64_t seed : seeds) {
    const auto c = cohort_types(sim, seed);
    users.insert(users.end(), c.begin(), c.end());
  }
  return users;
}

void run_solve(const ExperimentConfig& cfg, Outputs& out, CommandResult& res, std::ostream& log) {
  const QueryPanel panel = QueryPanel::for_market(cfg.market, cfg.population);
  const TrueModel model(cfg.market, cfg.solve.user);
  const BellmanOperator op(model, panel);
  const ValueTable v = value_iterate(op, cfg.solve.options);
  log << "  converged in " << v.iterations << " iterations, residual " << v.final_residual << "\n";
  out.write("values.csv", [&](std::ostream& os) { write_value_table_csv(os, v); });

  std::vector<EdgeRow> rows;
  const StateGrid grid = op.grid();
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    const UserState st = grid.state(cell);
    if (conversion_update(cfg.market, cfg.solve.user, st).subscribed) continue;
    for (const QueryDraw& q : panel.draws()) rows.push_back({st, q, q_edge(model, v, st, q)});
  }
  out.write("edges.csv", [&](std::ostream& os) { write_edges_csv(os, rows); });

  const SolveOptions ref_opts{std::min(cfg.solve.options.tol, 1e-11),
                              std::max(cfg.solve.options.max_iter, 100000)};
  const ValueTable ref = value_iterate(op, ref_opts);
  const std::vector<int> horizons{5, 10, 20};
  const HorizonReport hr = horizon_bound_check(op, ref, horizons, ref_opts.tol);
  out.write("horizon.csv", [&](std::ostream& os) {
    CsvWriter w(os, {"horizon", "value_gap", "value_bound", "edge_gap", "band", "points",
                     "outside_band", "agreements", "vacuous", "ok"});
    for (const auto& r : hr.rows) {
      w.row(r.horizon, r.value_gap, r.value_bound, r.edge_gap, r.band, r.points, r.outside_band,
            r.agreements, r.vacuous, r.ok);
    }
  });
  for (const auto& r : hr.rows) {
    pass_fail(res, "horizon_" + std::to_string(r.horizon), r.ok, log, r.witness);
  }
}

void run_simulate(const ExperimentConfig& cfg, Outputs& out, CommandResult&, std::ostream& log) {
  const SimConfig& sim = cfg.simulation.sim;
  const auto users = union_of_cohorts(sim, cfg.seeds);
  const Policy policy = build_policy(cfg.simulation.policy, sim.market, sim.population, sim.n_bins,
                                     users, cfg.solve.options, cfg.threads);
  std::vector<Trajectory> runs;
  for (std::uint64_t seed : cfg.seeds) {
    const EventLog events = simulate_cohort(sim, policy, seed, cfg.threads);
    runs.push_back(compute_metrics(events));
    const std::string tag = std::to_string(seed);
    out.write("trajectory_" + tag + ".csv",
              [&](std::ostream& os) { write_trajectory_csv(os, runs.back()); });
    out.write("events_" + tag + ".csv", [&](std::ostream& os) { write_events_csv(os, events); });
    log << "  seed " << seed << ": final payoff " << format_real(runs.back().final_payoff)
        << ", subscribers " << format_real(runs.back().final_subscribers) << "\n";
  }
  const Trajectory mean = mean_trajectory(runs);
  out.write("trajectory_mean.csv", [&](std::ostream& os) { write_trajectory_csv(os, mean); });
}

void run_compare(const ExperimentConfig& cfg, Outputs& out, CommandResult&, std::ostream& log) {
  const SimConfig& sim = cfg.simulation.sim;
  const auto users = union_of_cohorts(sim, cfg.seeds);
  struct Row {
    PolicyKind kind;
    std::vector<double> payoff, subs, share;
  };
  std::vector<Row> rows;
  for (PolicyKind kind : {PolicyKind::OptimalDP, PolicyKind::OneStepGreedy, PolicyKind::AlwaysAd,
                          PolicyKind::AlwaysFree}) {
    const Policy policy = build_policy(kind, sim.market, sim.population, sim.n_bins, users,
                                       cfg.solve.options, cfg.threads);
    std::vector<Trajectory> runs;
    Row row{kind, {}, {}, {}};
    for (std::uint64_t seed : cfg.seeds) {
      runs.push_back(compute_metrics(simulate_cohort(sim, policy, seed, cfg.threads)));
      row.payoff.push_back(runs.back().final_payoff);
      row.subs.push_back(runs.back().final_subscribers);
      if (runs.back().free_share) row.share.push_back(*runs.back().free_share);
    }
    const Trajectory mean = mean_trajectory(runs);
    out.write("trajectory_" + std::string(to_string(kind)) + ".csv",
              [&](std::ostream& os) { write_trajectory_csv(os, mean); });
    log << "  " << to_string(kind) << ": mean final payoff " << format_real(mean.final_payoff)
        << "\n";
    rows.push_back(std::move(row));
  }
  out.write("summary.csv", [&](std::ostream& os) {
    CsvWriter w(os, {"policy", "payoff_mean", "payoff_std", "payoff_per_user_mean",
                     "subscribers_mean", "subscribers_std", "free_share_mean"});
    for (const auto& r : rows) {
      const auto [pm, ps] = mean_std(r.payoff);
      const auto [sm, ss] = mean_std(r.subs);
      std::optional<double> share;
      if (!r.share.empty()) share = mean_std(r.share).first;
      w.row(to_string(r.kind), pm, ps, pm / sim.n_users, sm, ss, share);
    }
  });
}

void run_ablate(const ExperimentConfig& cfg, Outputs& out, CommandResult&, std::ostream& log) {
  SimConfig base = cfg.simulation.sim;
  base.n_users = cfg.ablation.n_users;
  const AblationResult r = run_ablation(base, cfg.ablation.conditions, cfg.ablation.policies,
                                        cfg.seeds, cfg.solve.options, cfg.threads);
  out.write("runs.csv", [&](std::ostream& os) { write_runs_csv(os, r.runs); });
  out.write("summary.csv", [&](std::ostream& os) { write_ablation_summary_csv(os, r.summary); });
  log << "  " << r.runs.size() << " runs over " << r.summary.size() << " conditions\n";
}

void run_sweep(const ExperimentConfig& cfg, Outputs& out, CommandResult& res, std::ostream& log) {
  SweepSpec spec;
  spec.param = cfg.sweep.param;
  spec.grid = cfg.sweep.grid;
  spec.anchor = cfg.sweep.anchor;
  spec.market = cfg.sweep.market;
  spec.population = cfg.population;
  const SweepResult r = sweep_scalar(spec, cfg.solve.options, cfg.threads);
  out.write("sweep.csv", [&](std::ostream& os) { write_sweep_csv(os, r); });
  verdict(res, "sweep_" + std::string(to_string(r.param)) + "_" + r.direction, r.verdict, log,
          r.detail);
}

void run_cutoff(const ExperimentConfig& cfg, Outputs& out, CommandResult& res, std::ostream& log) {
  const auto& c = cfg.cutoff;
  std::vector<CutoffShift> shifts;
  for (CutoffAxis axis : {CutoffAxis::Gamma, CutoffAxis::Psi, CutoffAxis::R}) {
    shifts.push_back(cutoff_shift(axis, cfg.market, cfg.population, c.anchor, c.omega_low,
                                  c.omega_high, cfg.solve.options));
  }
  out.write("cutoffs.csv", [&](std::ostream& os) {
    CsvWriter w(os, {"axis", "omega", "cutoff", "lo", "hi", "evaluations", "verdict"});
    for (const auto& s : shifts) {
      for (const auto* r : {&s.low, &s.high}) {
        w.row(to_string(r->axis), r == &s.low ? c.omega_low : c.omega_high, r->cutoff, r->lo,
              r->hi, r->evaluations, to_string(r->verdict));
      }
    }
  });
  for (const auto& s : shifts) {
    const std::string axis(to_string(s.low.axis));
    verdict(res, "sign_pattern_" + axis + "_low", s.low.verdict, log, s.low.detail);
    verdict(res, "sign_pattern_" + axis + "_high", s.high.verdict, log, s.high.detail);
    verdict(res, "shift_" + axis, s.verdict, log, s.detail);
  }

  for (MapPlane plane : {MapPlane::GammaPsi, MapPlane::GammaR}) {
    const std::string name = plane == MapPlane::GammaPsi ? "gamma_psi" : "gamma_r";
    MarketParams lo = cfg.market, hi = cfg.market;
    lo.omega = c.omega_low;
    hi.omega = c.omega_high;
    const CutoffMap a = cutoff_map(plane, lo, cfg.population, c.anchor, c.resolution,
                                   cfg.solve.options, cfg.threads);
    const CutoffMap b = cutoff_map(plane, hi, cfg.population, c.anchor, c.resolution,
                                   cfg.solve.options, cfg.threads);
    out.write("map_" + name + "_omega_low.csv", [&](std::ostream& os) { write_cutoff_map_csv(os, a); });
    out.write("map_" + name + "_omega_high.csv", [&](std::ostream& os) { write_cutoff_map_csv(os, b); });
    const MapCheck ma = check_gamma_monotone(a), mb = check_gamma_monotone(b);
    verdict(res, "map_" + name + "_gamma_monotone_low", ma.verdict, log, ma.detail);
    verdict(res, "map_" + name + "_gamma_monotone_high", mb.verdict, log, mb.detail);
    const MapCheck shrink = check_ad_region_shrinks(a, b);
    std::ostringstream d;
    d << "Ad cells " << a.ad_cells() << " -> " << b.ad_cells();
    if (!shrink.detail.empty()) d << "; " << shrink.detail;
    verdict(res, "map_" + name + "_ad_region_shrinks", shrink.verdict, log, d.str());
  }
  out.write("checks.csv", [&](std::ostream& os) {
    CsvWriter w(os, {"check", "verdict"});
    for (const auto& [k, v] : res.verdicts) w.row(k, v);
  });
}

void run_learn(const ExperimentConfig& cfg, Outputs& out, CommandResult& res, std::ostream& log) {
  const auto& l = cfg.learning;
  const LearningSetup setup = make_learning_setup(l.market, l.user, l.eta, l.r_bins, l.psi_bins);
  SolveOptions opts = cfg.solve.options;
  opts.tol = std::min(opts.tol, 1e-10);
  opts.max_iter = std::max(opts.max_iter, 100000);
  const std::uint64_t seed = cfg.seeds.front();
  const auto rows = run_learning(setup, l.n_records, seed, opts, cfg.threads);
  out.write("learning.csv", [&](std::ostream& os) { write_learning_csv(os, rows); });

  const std::size_t n_max = *std::max_element(l.n_records.begin(), l.n_records.end());
  const auto logs = generate_logs(setup.design(), n_max, seed, cfg.threads);
  out.write("logs.csv", [&](std::ostream& os) { write_logs_csv(os, logs); });
  const EstimatedPrimitives est =
      estimate_primitives(logs, setup.binning, setup.market.grid, &setup.market);
  out.write("estimates.csv", [&](std::ostream& os) { write_estimates_csv(os, est); });

  for (const auto& r : rows) {
    const auto& b = r.bounds;
    std::ostringstream d;
    d << "value gap " << format_real(b.value_gap) << " <= " << format_real(b.value_bound)
      << ", margin points " << b.margin_points << "/" << b.points;
    if (!b.witness.empty()) d << "; " << b.witness;
    pass_fail(res, "bounds_n" + std::to_string(r.n_records), b.ok(), log, d.str());
  }
}

void run_welfare(const ExperimentConfig& cfg, Outputs& out, CommandResult& res, std::ostream& log) {
  const auto& w = cfg.welfare;
  const QueryPanel panel = QueryPanel::for_market(cfg.market, cfg.population);
  SolveOptions opts = cfg.solve.options;
  opts.tol = std::min(opts.tol, 1e-10);
  opts.max_iter = std::max(opts.max_iter, 100000);
  const TrueModel revenue(cfg.market, w.user);
  const WelfareModel welfare(cfg.market, w.user, w.params);
  const BellmanOperator rop(revenue, panel), wop(welfare, panel);
  const ValueTable v = value_iterate(rop, opts);
  const ValueTable wv = value_iterate(wop, opts);
  const WelfareBounds bounds = resolve_welfare_bounds(w.params, cfg.market);
  const AlignmentReport rep = welfare_compare(rop, v, wop, wv, bounds, opts.tol);
  out.write("values_revenue.csv", [&](std::ostream& os) { write_value_table_csv(os, v); });
  out.write("values_welfare.csv", [&](std::ostream& os) { write_value_table_csv(os, wv); });
  out.write("alignment.csv", [&](std::ostream& os) {
    CsvWriter cw(os, {"u_max", "delta_sub_max", "eps_sw", "value_gap", "value_bound", "edge_gap",
                      "band", "points", "margin_points", "agreements", "total_agreements", "pass"});
    cw.row(bounds.u_max, bounds.delta_sub_max, bounds.eps_sw, rep.value_gap, bounds.value_bound,
           rep.edge_gap, bounds.band, rep.points, rep.margin_points, rep.agreements,
           rep.total_agreements, rep.ok());
  });
  out.write("disagreements.csv",
            [&](std::ostream& os) { write_disagreements_csv(os, rep.disagreements); });
  std::ostringstream d;
  d << "value gap " << format_real(rep.value_gap) << " <= " << format_real(bounds.value_bound)
    << ", edge gap " << format_real(rep.edge_gap) << " <= " << format_real(bounds.band)
    << ", margin points " << rep.margin_points << "/" << rep.points;
  if (!rep.witness.empty()) d << "; " << rep.witness;
  pass_fail(res, "welfare_alignment", rep.ok(), log, d.str());
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

}  // namespace

CommandResult run_command(const ExperimentConfig& config, Command command, const fs::path& out,
                          std::ostream& log) {
  if (out.empty()) throw ConfigError("out", "output directory must not be empty");
  fs::path partial = out;
  partial += ".partial";
  fs::remove_all(partial);
  fs::create_directories(partial);

  const std::string started = utc_now();
  const auto t0 = std::chrono::steady_clock::now();
  CommandResult res;
  Outputs files(partial);
  log << to_string(command) << ": writing to " << out.string() << "\n";
  try {
    switch (command) {
      case Command::Solve: run_solve(config, files, res, log); break;
      case Command::Simulate: run_simulate(config, files, res, log); break;
      case Command::Compare: run_compare(config, files, res, log); break;
      case Command::Ablate: run_ablate(config, files, res, log); break;
      case Command::Sweep: run_sweep(config, files, res, log); break;
      case Command::Cutoff: run_cutoff(config, files, res, log); break;
      case Command::Learn: run_learn(config, files, res, log); break;
      case Command::Welfare: run_welfare(config, files, res, log); break;
    }
  } catch (...) {
    fs::remove_all(partial);
    throw;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json manifest;
  manifest["command"] = std::string(to_string(command));
  manifest["config_source"] = config.source;
  manifest["config"] = config.resolved;
  manifest["seeds"] = config.seeds;
  manifest["threads"] = config.threads;
  manifest["versions"] = {{"gemdp", GEMDP_VERSION},
                          {"compiler", __VERSION__},
                          {"cxx_standard", __cplusplus},
                          {"boost", BOOST_LIB_VERSION},
                          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
  manifest["started_at"] = started;
  manifest["wall_time_s"] = wall;
  manifest["files"] = files.files;
  json verdicts = json::object();
  for (const auto& [k, v] : res.verdicts) verdicts[k] = v;
  manifest["verdicts"] = verdicts;
  manifest["exit_code"] = res.exit_code;
  {
    std::ofstream os(partial / "manifest.json");
    os << manifest.dump(2) << "\n";
    if (!os) throw std::runtime_error("cannot write manifest.json");
  }
  res.files = files.files;
  res.files.push_back("manifest.json");

  if (fs::exists(out)) fs::remove_all(out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  fs::rename(partial, out);
  log << to_string(command) << ": done in " << std::fixed << std::setprecision(2) << wall
      << " s, exit " << res.exit_code << "\n";
  log.unsetf(std::ios::floatfield);
  return res;
}

}  // namespace gemdp
