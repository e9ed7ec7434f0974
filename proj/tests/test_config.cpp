#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "gemdp/config.hpp"
#include "gemdp/errors.hpp"

using namespace gemdp;
using nlohmann::json;

namespace {

// Returns the ConfigError key, or "" when parsing succeeded.
std::string error_key(const json& doc, const json& overrides = json::object()) {
  try {
    parse_config(doc, "test.json", overrides);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "";
}

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream(path) << text;
  return path;
}

}  // namespace

TEST_CASE("the discount factor is required") {
  CHECK(error_key(json::object()) == "market.beta");
  try {
    parse_config(json::object(), "exp.json");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("exp.json: market.beta: ", 0) == 0);
  }
}

TEST_CASE("discount factor must lie strictly inside (0, 1)") {
  CHECK(error_key({{"market", {{"beta", 1.0}}}}) == "market.beta");
  CHECK(error_key({{"market", {{"beta", 0.0}}}}) == "market.beta");
  CHECK(error_key({{"market", {{"beta", 0.95}}}}).empty());
}

TEST_CASE("unknown keys and wrong types are named") {
  const json base = {{"market", {{"beta", 0.9}}}};
  json doc = base;
  doc["market"]["bogus"] = 1;
  CHECK(error_key(doc) == "market.bogus");
  doc = base;
  doc["extra"] = true;
  CHECK(error_key(doc) == "extra");
  doc = base;
  doc["market"]["price"] = "four";
  CHECK(error_key(doc) == "market.price");
  doc = base;
  doc["seeds"] = {1, "x"};
  CHECK(error_key(doc) == "seeds[1]");
  doc = base;
  doc["market"]["grid"] = 20;
  CHECK(error_key(doc) == "market.grid");
}

TEST_CASE("constraint violations are named") {
  const json base = {{"market", {{"beta", 0.9}}}};
  CHECK(error_key(base, {{"market", {{"kappa_paid", 0.1}}}}) == "market.kappa_paid");
  CHECK(error_key(base, {{"market", {{"retention", {{"rho_min", 1.5}}}}}}) ==
        "market.retention.rho_min");
  CHECK(error_key(base, {{"simulation", {{"policy", "random"}}}}) == "simulation.policy");
  CHECK(error_key(base, {{"ablation", {{"conditions", {"gamma_high", "nope"}}}}}) ==
        "ablation.conditions");
  CHECK(error_key(base, {{"sweep", {{"grid", {0.5, 0.2}}}}}) == "sweep.grid");
  CHECK(error_key(base, {{"sweep", {{"s", 99}}}}) == "sweep.s");
  CHECK(error_key(base, {{"learning", {{"eta", 0.7}}}}) == "learning.eta");
  CHECK(error_key(base, {{"learning", {{"market", {{"utility", {{"uc_ad", 0.3}}}}}}}}) ==
        "learning.market.utility.uc_ad");
  CHECK(error_key(base, {{"welfare", {{"u_max", 0.01}}}}) == "welfare.u_max");
  CHECK(error_key(base, {{"population", {{"r", {{"kind", "beta"}}}}}}) == "population.r");
  CHECK(error_key(base, {{"threads", 0}}) == "threads");
  CHECK(error_key(base, {{"seeds", json::array()}}) == "seeds");
}

TEST_CASE("defaults are merged and echoed") {
  const ExperimentConfig cfg = parse_config({{"market", {{"beta", 0.9}}}}, "test.json");
  CHECK(cfg.source == "test.json");
  CHECK(cfg.market.beta == 0.9);
  CHECK(cfg.market.price == 4.0);
  CHECK(cfg.market.payoff_convention == PayoffConvention::AppendixSim);
  CHECK(cfg.resolved["market"]["price"] == 4.0);
  CHECK(cfg.resolved["market"]["beta"] == 0.9);
  CHECK(cfg.seeds.size() == 5);
  CHECK(cfg.simulation.sim.market.beta == 0.9);
  CHECK(cfg.ablation.conditions.size() == 8);
  CHECK(cfg.ablation.policies.size() == 4);
  // Section markets start from the top-level market.
  CHECK(cfg.sweep.market.price == 4.0);
  CHECK(cfg.learning.market.beta == 0.8);
  CHECK(cfg.learning.market.grid.s_max == 5);
  CHECK(cfg.learning.market.payoff_convention == PayoffConvention::MainText);
  CHECK_FALSE(default_document()["market"].contains("beta"));
}

TEST_CASE("overrides win over the file") {
  const json doc = {{"market", {{"beta", 0.9}, {"omega", 0.1}}}, {"seeds", {1, 2}}};
  const ExperimentConfig cfg =
      parse_config(doc, "f.json", {{"market", {{"omega", 0.3}}}, {"seeds", {7}}});
  CHECK(cfg.market.omega == 0.3);
  CHECK(cfg.seeds == std::vector<std::uint64_t>{7});
  CHECK(cfg.market.beta == 0.9);
  CHECK(cfg.resolved["market"]["omega"] == 0.3);
}

TEST_CASE("population shapes") {
  const ExperimentConfig cfg =
      parse_config({{"market", {{"beta", 0.9}}},
                    {"population", {{"gamma", {{"kind", "beta"}, {"a", 5}, {"b", 2}}}}}},
                   "p.json");
  CHECK(cfg.population.gamma.kind == Distribution::Kind::Beta);
  CHECK(cfg.population.gamma.mean() == doctest::Approx(5.0 / 7.0));
  CHECK(cfg.population.theta.kind == Distribution::Kind::Uniform);
}

TEST_CASE("files are read and their name appears in errors") {
  const auto good = write_temp("gemdp_cfg_good.json", R"({"market": {"beta": 0.95}})");
  CHECK(load_config(good).market.beta == 0.95);
  CHECK(load_config(good).source == good.string());

  const auto bad = write_temp("gemdp_cfg_bad.json", R"({"market": {"beta": 2}})");
  try {
    load_config(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(bad.string()) != std::string::npos);
    CHECK(e.key() == "market.beta");
  }

  const auto broken = write_temp("gemdp_cfg_broken.json", "{\"market\": ");
  CHECK_THROWS_AS(load_config(broken), ConfigError);
  CHECK_THROWS_AS(load_config(std::filesystem::temp_directory_path() / "gemdp_no_such_file.json"),
                  ConfigError);
  for (const auto& p : {good, bad, broken}) std::filesystem::remove(p);
}
