#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "gemdp/errors.hpp"
#include "gemdp/harness.hpp"

int main(int argc, char** argv) {
  using namespace gemdp;
  CLI::App app{"Ad vs ad-free display decisions: solver, simulator and verification harness"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::optional<int> threads;
  std::string param;
  std::vector<double> grid;

  for (Command c : {Command::Solve, Command::Simulate, Command::Compare, Command::Ablate,
                    Command::Sweep, Command::Cutoff, Command::Learn, Command::Welfare}) {
    CLI::App* sub = app.add_subcommand(std::string(to_string(c)));
    sub->add_option("--config", config_path, "Experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, "Output directory (default $GEMDP_OUT_ROOT/<command>)");
    sub->add_option("--seeds", seeds, "Comma-separated seed list")->delimiter(',');
    sub->add_option("--threads", threads, "Worker threads");
    if (c == Command::Sweep) {
      sub->add_option("--param", param, "Swept parameter");
      sub->add_option("--grid", grid, "Comma-separated grid values")->delimiter(',');
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  const Command command = command_from_string(app.get_subcommands().front()->get_name());
  nlohmann::json overrides = nlohmann::json::object();
  if (!seeds.empty()) overrides["seeds"] = seeds;
  if (threads) overrides["threads"] = *threads;
  if (!param.empty()) overrides["sweep"]["param"] = param;
  if (!grid.empty()) overrides["sweep"]["grid"] = grid;

  try {
    const ExperimentConfig config = load_config(config_path, overrides);
    const auto out = out_dir.empty() ? default_output_dir(command) : std::filesystem::path(out_dir);
    const CommandResult res = run_command(config, command, out, std::cout);
    return res.exit_code;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
  } catch (const ConvergenceError& e) {
    std::cerr << "solver error: " << e.what() << " (residual " << e.residual() << " after "
              << e.iterations() << " iterations)\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
  }
  return kExitInvalid;
}
