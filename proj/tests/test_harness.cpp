#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "gemdp/errors.hpp"
#include "gemdp/harness.hpp"

using namespace gemdp;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const json& extra = json::object()) {
  const json doc = {{"market", {{"beta", 0.9}, {"grid", {{"s_max", 8}, {"c_max", 8}}}, {"n_q", 10}}},
                    {"seeds", {1, 2, 3, 4, 5}},
                    {"simulation", {{"n_users", 30}, {"horizon", 6}}},
                    {"ablation", {{"n_users", 10}}}};
  return parse_config(doc, "harness.json", extra);
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("gemdp_harness_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t lines(const fs::path& p) {
  const std::string s = slurp(p);
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("command names") {
  for (Command c : {Command::Solve, Command::Simulate, Command::Compare, Command::Ablate,
                    Command::Sweep, Command::Cutoff, Command::Learn, Command::Welfare}) {
    CHECK(command_from_string(to_string(c)) == c);
  }
  CHECK_THROWS_AS(command_from_string("plot"), ConfigError);
}

TEST_CASE("compare writes one trajectory per policy and a summary") {
  TempDir tmp;
  std::ostringstream log;
  const fs::path out = tmp.path / "compare";
  const CommandResult r = run_command(small_config(), Command::Compare, out, log);
  CHECK(r.exit_code == kExitOk);
  for (const char* f : {"trajectory_optimal_dp.csv", "trajectory_one_step_greedy.csv",
                        "trajectory_always_ad.csv", "trajectory_always_free.csv", "summary.csv",
                        "manifest.json"}) {
    CHECK(fs::exists(out / f));
  }
  CHECK(lines(out / "summary.csv") == 5);
  CHECK(lines(out / "trajectory_always_ad.csv") == 7);
  CHECK_FALSE(fs::exists(tmp.path / "compare.partial"));

  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["command"] == "compare");
  CHECK(manifest["config_source"] == "harness.json");
  CHECK(manifest["config"]["market"]["beta"] == 0.9);
  CHECK(manifest["seeds"].size() == 5);
  CHECK(manifest["exit_code"] == 0);
  CHECK(manifest["versions"].contains("boost"));
  CHECK(manifest["files"].size() == 5);
}

TEST_CASE("ablate covers the full design") {
  TempDir tmp;
  std::ostringstream log;
  const fs::path out = tmp.path / "ablate";
  run_command(small_config({{"threads", 4}}), Command::Ablate, out, log);
  CHECK(lines(out / "runs.csv") == 161);
  CHECK(lines(out / "summary.csv") == 9);
}

TEST_CASE("simulate output is identical across runs and thread counts") {
  TempDir tmp;
  std::ostringstream log;
  run_command(small_config({{"threads", 1}}), Command::Simulate, tmp.path / "a", log);
  run_command(small_config({{"threads", 1}}), Command::Simulate, tmp.path / "b", log);
  run_command(small_config({{"threads", 8}}), Command::Simulate, tmp.path / "c", log);
  for (const char* f : {"trajectory_1.csv", "events_3.csv", "trajectory_mean.csv"}) {
    const std::string a = slurp(tmp.path / "a" / f);
    CHECK_FALSE(a.empty());
    CHECK(a == slurp(tmp.path / "b" / f));
    CHECK(a == slurp(tmp.path / "c" / f));
  }
}

TEST_CASE("checked commands record their verdicts") {
  TempDir tmp;
  std::ostringstream log;
  const ExperimentConfig cfg = small_config();
  const CommandResult sweep = run_command(cfg, Command::Sweep, tmp.path / "sweep", log);
  REQUIRE(sweep.verdicts.size() == 1);
  CHECK(sweep.verdicts[0].first == "sweep_omega_decreasing");
  CHECK(sweep.verdicts[0].second == "verified");
  CHECK(lines(tmp.path / "sweep" / "sweep.csv") == 4);

  const CommandResult solve = run_command(cfg, Command::Solve, tmp.path / "solve", log);
  CHECK(solve.exit_code == kExitOk);
  CHECK(solve.verdicts.size() == 3);
  CHECK(fs::exists(tmp.path / "solve" / "values.csv"));
  CHECK(fs::exists(tmp.path / "solve" / "edges.csv"));

  const CommandResult welfare = run_command(cfg, Command::Welfare, tmp.path / "welfare", log);
  CHECK(welfare.exit_code == kExitOk);
  CHECK(fs::exists(tmp.path / "welfare" / "disagreements.csv"));
}

TEST_CASE("a failing run leaves nothing behind and keeps the old output") {
  TempDir tmp;
  std::ostringstream log;
  const fs::path out = tmp.path / "sweep";
  run_command(small_config(), Command::Sweep, out, log);
  REQUIRE(fs::exists(out / "sweep.csv"));
  // Cost sweeps need an anchor in the one-step conversion region; the default is not.
  const ExperimentConfig bad =
      small_config({{"sweep", {{"param", "kappa_free"}, {"grid", {0.1, 0.5}}}}});
  CHECK_THROWS_AS(run_command(bad, Command::Sweep, out, log), std::invalid_argument);
  CHECK_FALSE(fs::exists(tmp.path / "sweep.partial"));
  CHECK(fs::exists(out / "sweep.csv"));
  const json manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest["verdicts"]["sweep_omega_decreasing"] == "verified");
}

TEST_CASE("an existing output directory is replaced") {
  TempDir tmp;
  std::ostringstream log;
  const fs::path out = tmp.path / "solve";
  fs::create_directories(out);
  std::ofstream(out / "stale.txt") << "old";
  run_command(small_config(), Command::Solve, out, log);
  CHECK_FALSE(fs::exists(out / "stale.txt"));
  CHECK(fs::exists(out / "manifest.json"));
}
