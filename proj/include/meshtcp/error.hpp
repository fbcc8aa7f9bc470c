#pragma once

#include <stdexcept>
#include <string>

namespace meshtcp {

// Bad user-supplied configuration (unknown flavor, malformed line, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// A caller broke an operation's precondition. Inside a simulation this is
// always a bug, never a user error.
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// A metric has no defined value for the given trace (e.g. zero deliveries).
class MetricUndefined : public std::runtime_error {
 public:
  explicit MetricUndefined(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace meshtcp
