#pragma once

#include <stdexcept>
#include <string>

namespace skeldp {

/// A computation produced a non-finite or otherwise unusable number
/// (singular regression after ridge escalation, non-finite payoff, ...).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration rejected before any simulation starts. `field` names the
/// offending key so front-ends can report it.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace skeldp
