#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace quadassist {

/// Raised when a wire report cannot be turned into a QuadstickFrame.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::string field, const std::string& detail)
      : std::runtime_error(field + ": " + detail), field_(std::move(field)) {}

  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Invalid configuration value (deadzone, weights, keyword table, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke a documented precondition. Indicates a bug in the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Scenario or robot model file could not be loaded.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Pilot script failed validation before a run.
class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Session message does not match its schema.
class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ScoringError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace quadassist
