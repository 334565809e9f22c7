#pragma once

#include <stdexcept>
#include <string>

namespace weargen {

// Error kinds surfaced by the library. The CLI maps each to a stable `kind=` token.

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NumericGuard : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class OutOfBounds : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for bad or incomplete configuration; `stage()` names the pipeline
/// stage the problem belongs to ("wd", "lps1", "lps2", "base", "sw", ...).
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

/// A stage ran but produced output the next stage cannot use.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace weargen
