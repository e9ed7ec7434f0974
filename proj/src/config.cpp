#include "gemdp/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "gemdp/defaults_json.hpp"
#include "gemdp/errors.hpp"

namespace gemdp {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Schema = defaults plus the keys that have no default value.
const json& schema() {
  static const json s = [] {
    json d = default_document();
    d["market"]["beta"] = 0.0;
    for (const char* axis : {"gamma", "theta", "r", "psi"}) {
      d["population"][axis]["a"] = 1.0;
      d["population"][axis]["b"] = 1.0;
    }
    d["sweep"]["market"] = d["market"];
    d["learning"]["market"] = d["market"];
    return d;
  }();
  return s;
}

void check_type(const json& expected, const json& value, const std::string& key) {
  if (expected.is_object()) {
    if (!value.is_object()) throw ConfigError(key, "must be an object");
  } else if (expected.is_array()) {
    if (!value.is_array()) throw ConfigError(key, "must be an array");
    if (!expected.empty()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        check_type(expected.front(), value[i], key + "[" + std::to_string(i) + "]");
      }
    }
  } else if (expected.is_number()) {
    if (!value.is_number()) throw ConfigError(key, "must be a number");
  } else if (expected.is_string()) {
    if (!value.is_string()) throw ConfigError(key, "must be a string");
  } else if (expected.is_null()) {
    if (!value.is_null() && !value.is_number()) throw ConfigError(key, "must be a number or null");
  }
}

// Deep merge with schema checking; arrays and scalars replace wholesale.
void merge(json& base, const json& patch, const json& shape, const std::string& path) {
  for (const auto& [key, value] : patch.items()) {
    const std::string full = join(path, key);
    if (!shape.contains(key)) throw ConfigError(full, "unknown key");
    const json& expected = shape.at(key);
    check_type(expected, value, full);
    if (expected.is_object()) {
      if (!base.contains(key) || !base[key].is_object()) base[key] = json::object();
      merge(base[key], value, expected, full);
    } else {
      base[key] = value;
    }
  }
}

double real(const json& node, const std::string& key) {
  if (!node.is_number()) throw ConfigError(key, "must be a number");
  const double v = node.get<double>();
  if (!std::isfinite(v)) throw ConfigError(key, "must be finite");
  return v;
}

long long integer(const json& node, const std::string& key) {
  const double v = real(node, key);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) throw ConfigError(key, "must be an integer");
  return static_cast<long long>(v);
}

int small_int(const json& node, const std::string& key) {
  const long long v = integer(node, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(key, "out of range");
  }
  return static_cast<int>(v);
}

std::uint64_t unsigned_int(const json& node, const std::string& key) {
  if (node.is_number_unsigned()) return node.get<std::uint64_t>();
  const long long v = integer(node, key);
  if (v < 0) throw ConfigError(key, "must be >= 0");
  return static_cast<std::uint64_t>(v);
}

double unit(const json& node, const std::string& key) {
  const double v = real(node, key);
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must lie in [0, 1]");
  return v;
}

Distribution distribution(const json& node, const std::string& key) {
  const std::string kind = node.at("kind").get<std::string>();
  if (kind == "uniform") {
    if (node.contains("a") || node.contains("b")) {
      throw ConfigError(key + ".kind", "uniform takes no shape parameters");
    }
    return Distribution::uniform();
  }
  if (kind == "beta") {
    if (!node.contains("a") || !node.contains("b")) {
      throw ConfigError(key, "beta needs shape parameters a and b");
    }
    Distribution d = Distribution::beta(real(node["a"], key + ".a"), real(node["b"], key + ".b"));
    d.validate(key);
    return d;
  }
  throw ConfigError(key + ".kind", "must be \"uniform\" or \"beta\", got \"" + kind + "\"");
}

MarketParams market_from(const json& m, const std::string& prefix) {
  if (!m.contains("beta") || m["beta"].is_null()) {
    throw ConfigError(prefix + ".beta", "is required (discount factor in (0, 1))");
  }
  const auto k = [&](const char* key) { return prefix + "." + key; };
  MarketParams p;
  p.beta = real(m["beta"], k("beta"));
  p.price = real(m["price"], k("price"));
  p.kappa_free = real(m["kappa_free"], k("kappa_free"));
  p.kappa_paid = real(m["kappa_paid"], k("kappa_paid"));
  p.omega = real(m["omega"], k("omega"));
  const json& u = m["utility"];
  p.utility = {real(u["w_psi"], k("utility.w_psi")),   real(u["w_r_free"], k("utility.w_r_free")),
               real(u["u0_ad"], k("utility.u0_ad")),   real(u["ur_ad"], k("utility.ur_ad")),
               real(u["w_gamma"], k("utility.w_gamma")), real(u["uc_ad"], k("utility.uc_ad"))};
  const json& r = m["revenue"];
  p.revenue = {real(r["b0"], k("revenue.b0")), real(r["b_r"], k("revenue.b_r")),
               real(r["b_c"], k("revenue.b_c")), real(r["b_s"], k("revenue.b_s"))};
  const json& ret = m["retention"];
  p.retention = {real(ret["rho_min"], k("retention.rho_min")),
                 real(ret["alpha_s"], k("retention.alpha_s")),
                 real(ret["alpha_c"], k("retention.alpha_c"))};
  const json& c = m["conversion"];
  p.conversion = {real(c["tau0"], k("conversion.tau0")), real(c["tau_p"], k("conversion.tau_p")),
                  real(c["tau_theta"], k("conversion.tau_theta")),
                  real(c["tau_c"], k("conversion.tau_c"))};
  p.grid = {small_int(m["grid"]["s_max"], k("grid.s_max")),
            small_int(m["grid"]["c_max"], k("grid.c_max"))};
  if (p.grid.s_max > 200 || p.grid.c_max > 200) {
    throw ConfigError(k("grid"), "caps above 200 are not supported");
  }
  p.psi_cut = real(m["psi_cut"], k("psi_cut"));
  p.n_q = small_int(m["n_q"], k("n_q"));
  p.panel_seed = unsigned_int(m["panel_seed"], k("panel_seed"));
  p.reward_bound = real(m["reward_bound"], k("reward_bound"));
  try {
    p.payoff_convention = payoff_convention_from_string(m["payoff_convention"].get<std::string>());
    p.validate();
  } catch (const ConfigError& e) {
    // validate() names fields "market.*"; report them under this section.
    std::string key = e.key();
    const std::string rule = std::string(e.what()).substr(key.size() + 2);
    if (key.rfind("market", 0) == 0) key = prefix + key.substr(6);
    throw ConfigError(key, rule);
  }
  return p;
}

UserType user_from(const json& section, const std::string& prefix) {
  return {unit(section["gamma"], prefix + ".gamma"), unit(section["theta"], prefix + ".theta")};
}

Anchor anchor_from(const json& section, const std::string& prefix, const MarketParams& market) {
  Anchor a;
  a.user = user_from(section, prefix);
  a.state.s = small_int(section["s"], prefix + ".s");
  a.state.c = small_int(section["c"], prefix + ".c");
  if (a.state.s < 0 || a.state.s > market.grid.s_max) {
    throw ConfigError(prefix + ".s", "must lie on the state grid");
  }
  if (a.state.c < 0 || a.state.c > market.grid.c_max) {
    throw ConfigError(prefix + ".c", "must lie on the state grid");
  }
  if (conversion_update(market, a.user, a.state).subscribed) {
    throw ConfigError(prefix + ".s", "anchor state has already converted (no display decision)");
  }
  a.query = {unit(section["r"], prefix + ".r"), unit(section["psi"], prefix + ".psi")};
  return a;
}

std::vector<double> reals(const json& node, const std::string& key) {
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    out.push_back(real(node[i], key + "[" + std::to_string(i) + "]"));
  }
  return out;
}

ExperimentConfig build(const json& doc) {
  ExperimentConfig cfg;
  cfg.market = market_from(doc["market"], "market");
  const json& pop = doc["population"];
  cfg.population = {distribution(pop["gamma"], "population.gamma"),
                    distribution(pop["theta"], "population.theta"),
                    distribution(pop["r"], "population.r"),
                    distribution(pop["psi"], "population.psi")};

  for (std::size_t i = 0; i < doc["seeds"].size(); ++i) {
    cfg.seeds.push_back(unsigned_int(doc["seeds"][i], "seeds[" + std::to_string(i) + "]"));
  }
  if (cfg.seeds.empty()) throw ConfigError("seeds", "must be non-empty");
  cfg.threads = small_int(doc["threads"], "threads");
  if (cfg.threads < 1 || cfg.threads > 256) throw ConfigError("threads", "must lie in [1, 256]");

  const json& so = doc["solve"];
  cfg.solve.user = user_from(so, "solve");
  cfg.solve.options.tol = real(so["tol"], "solve.tol");
  cfg.solve.options.max_iter = small_int(so["max_iter"], "solve.max_iter");
  if (!(cfg.solve.options.tol > 0.0)) throw ConfigError("solve.tol", "must be > 0");
  if (cfg.solve.options.max_iter < 1) throw ConfigError("solve.max_iter", "must be >= 1");

  const json& si = doc["simulation"];
  cfg.simulation.sim.n_users = small_int(si["n_users"], "simulation.n_users");
  cfg.simulation.sim.horizon = small_int(si["horizon"], "simulation.horizon");
  cfg.simulation.sim.n_bins = small_int(si["n_bins"], "simulation.n_bins");
  cfg.simulation.sim.market = cfg.market;
  cfg.simulation.sim.population = cfg.population;
  cfg.simulation.sim.validate();
  try {
    cfg.simulation.policy = policy_kind_from_string(si["policy"].get<std::string>());
  } catch (const ConfigError& e) {
    throw ConfigError("simulation.policy", std::string(e.what()).substr(e.key().size() + 2));
  }

  const json& ab = doc["ablation"];
  cfg.ablation.n_users = small_int(ab["n_users"], "ablation.n_users");
  if (cfg.ablation.n_users < 1) throw ConfigError("ablation.n_users", "must be >= 1");
  for (const auto& c : ab["conditions"]) {
    MarketParams m = cfg.market;
    PopulationSpec p = cfg.population;
    apply_condition(c.get<std::string>(), m, p);
    cfg.ablation.conditions.push_back(c.get<std::string>());
  }
  if (cfg.ablation.conditions.empty()) throw ConfigError("ablation.conditions", "must be non-empty");
  for (const auto& name : ab["policies"]) {
    try {
      cfg.ablation.policies.push_back(policy_kind_from_string(name.get<std::string>()));
    } catch (const ConfigError& e) {
      throw ConfigError("ablation.policies", std::string(e.what()).substr(e.key().size() + 2));
    }
  }
  if (cfg.ablation.policies.empty()) throw ConfigError("ablation.policies", "must be non-empty");

  const json& sw = doc["sweep"];
  json sweep_market = doc["market"];
  merge(sweep_market, sw["market"], schema()["market"], "sweep.market");
  cfg.sweep.market = market_from(sweep_market, "sweep.market");
  cfg.sweep.param = sweep_param_from_string(sw["param"].get<std::string>());
  cfg.sweep.grid = reals(sw["grid"], "sweep.grid");
  if (cfg.sweep.grid.size() < 2) throw ConfigError("sweep.grid", "needs at least two values");
  for (std::size_t i = 0; i + 1 < cfg.sweep.grid.size(); ++i) {
    if (!(cfg.sweep.grid[i] < cfg.sweep.grid[i + 1])) {
      throw ConfigError("sweep.grid", "must be strictly increasing");
    }
  }
  cfg.sweep.anchor = anchor_from(sw, "sweep", cfg.sweep.market);

  const json& cu = doc["cutoff"];
  cfg.cutoff.anchor = anchor_from(cu, "cutoff", cfg.market);
  const auto omegas = reals(cu["omegas"], "cutoff.omegas");
  if (omegas.size() != 2 || !(omegas[0] >= 0.0 && omegas[0] < omegas[1])) {
    throw ConfigError("cutoff.omegas", "must be two increasing values >= 0");
  }
  cfg.cutoff.omega_low = omegas[0];
  cfg.cutoff.omega_high = omegas[1];
  cfg.cutoff.resolution = small_int(cu["resolution"], "cutoff.resolution");
  if (cfg.cutoff.resolution < 1 || cfg.cutoff.resolution > 64) {
    throw ConfigError("cutoff.resolution", "must lie in [1, 64]");
  }

  const json& le = doc["learning"];
  json learning_market = doc["market"];
  merge(learning_market, le["market"], schema()["market"], "learning.market");
  cfg.learning.market = market_from(learning_market, "learning.market");
  cfg.learning.user = user_from(le, "learning");
  cfg.learning.eta = real(le["eta"], "learning.eta");
  if (!(cfg.learning.eta > 0.0 && cfg.learning.eta <= 0.5)) {
    throw ConfigError("learning.eta", "must lie in (0, 0.5]");
  }
  for (std::size_t i = 0; i < le["n_records"].size(); ++i) {
    const long long n = integer(le["n_records"][i], "learning.n_records[" + std::to_string(i) + "]");
    if (n < 1 || n > 100000000) throw ConfigError("learning.n_records", "entries must lie in [1, 1e8]");
    cfg.learning.n_records.push_back(static_cast<std::size_t>(n));
  }
  if (cfg.learning.n_records.empty()) throw ConfigError("learning.n_records", "must be non-empty");
  cfg.learning.r_bins = small_int(le["r_bins"], "learning.r_bins");
  cfg.learning.psi_bins = small_int(le["psi_bins"], "learning.psi_bins");
  make_learning_setup(cfg.learning.market, cfg.learning.user, cfg.learning.eta, cfg.learning.r_bins,
                      cfg.learning.psi_bins);

  const json& we = doc["welfare"];
  cfg.welfare.user = user_from(we, "welfare");
  cfg.welfare.params.benefit = benefit_kind_from_string(we["benefit"].get<std::string>());
  cfg.welfare.params.benefit_ad = real(we["benefit_ad"], "welfare.benefit_ad");
  cfg.welfare.params.benefit_free = real(we["benefit_free"], "welfare.benefit_free");
  if (!we["w_sub"].is_null()) cfg.welfare.params.w_sub = real(we["w_sub"], "welfare.w_sub");
  if (!we["u_max"].is_null()) cfg.welfare.params.u_max = real(we["u_max"], "welfare.u_max");
  if (!we["delta_sub_max"].is_null()) {
    cfg.welfare.params.delta_sub_max = real(we["delta_sub_max"], "welfare.delta_sub_max");
  }
  resolve_welfare_bounds(cfg.welfare.params, cfg.market);
  return cfg;
}

}  // namespace

const json& default_document() {
  static const json d = json::parse(detail::kDefaultsJson);
  return d;
}

MarketParams default_market_params(double beta) {
  json m = default_document()["market"];
  m["beta"] = beta;
  return market_from(m, "market");
}

ExperimentConfig parse_config(const json& doc, const std::string& source, const json& overrides) {
  try {
    if (!doc.is_object()) throw ConfigError("(root)", "must be a JSON object");
    if (!overrides.is_object()) throw ConfigError("(overrides)", "must be a JSON object");
    json merged = default_document();
    merge(merged, doc, schema(), "");
    merge(merged, overrides, schema(), "");
    ExperimentConfig cfg = build(merged);
    cfg.source = source;
    cfg.resolved = std::move(merged);
    return cfg;
  } catch (const ConfigError& e) {
    const std::string rule = std::string(e.what()).substr(e.key().size() + 2);
    throw ConfigError(source, e.key(), rule);
  }
}

ExperimentConfig load_config(const std::filesystem::path& path, const json& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "(file)", "cannot be opened");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), "(file)", std::string("JSON parse error: ") + e.what());
  }
  return parse_config(doc, path.string(), overrides);
}

}  // namespace gemdp
