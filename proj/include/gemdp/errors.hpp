#pragma once

#include <stdexcept>
#include <string>

namespace gemdp {

/// A configuration or parameter value broke a documented constraint. `key()`
/// is the dotted path of the offending field (e.g. "market.beta").
class ConfigError : public std::invalid_argument {
public:
  ConfigError(std::string key, const std::string& rule)
      : std::invalid_argument(key + ": " + rule), key_(std::move(key)) {}
  /// Same error located in a file: "<source>: <key>: <rule>".
  ConfigError(const std::string& source, std::string key, const std::string& rule)
      : std::invalid_argument(source + ": " + key + ": " + rule), key_(std::move(key)) {}

  const std::string& key() const noexcept { return key_; }

private:
  std::string key_;
};

/// Value iteration hit its iteration cap before the residual reached tolerance.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : std::runtime_error(what), residual_(residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_;
  int iterations_;
};

}  // namespace gemdp
