#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "gemdp/config.hpp"

namespace gemdp {

enum class Command { Solve, Simulate, Compare, Ablate, Sweep, Cutoff, Learn, Welfare };

std::string_view to_string(Command c);
/// Throws ConfigError("command", ...) for unknown names.
Command command_from_string(std::string_view name);

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitViolation = 2;

/// Output directory when none is given: $GEMDP_OUT_ROOT/<command>, or
/// runs/<command> when the variable is unset.
std::filesystem::path default_output_dir(Command command);

struct CommandResult {
  int exit_code = kExitOk;
  std::vector<std::string> files;  // relative to the output directory
  std::vector<std::pair<std::string, std::string>> verdicts;  // (check, verdict)
};

/// Runs `command`, writing CSVs and manifest.json into `<out>.partial` and
/// renaming it to `out` once everything is written. An existing `out` is
/// replaced. Progress lines go to `log`. Exceptions propagate with nothing
/// promoted.
CommandResult run_command(const ExperimentConfig& config, Command command,
                          const std::filesystem::path& out, std::ostream& log);

}  // namespace gemdp
