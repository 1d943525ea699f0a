#pragma once

#include <stdexcept>
#include <string>

namespace dynmsf {

// Error taxonomy. Callers are expected to distinguish these; messages carry
// the offending ids/values for debugging, tests match on type.

struct CycleError : std::runtime_error {
  explicit CycleError(const std::string& m) : std::runtime_error(m) {}
};

struct NotPresentError : std::runtime_error {
  explicit NotPresentError(const std::string& m) : std::runtime_error(m) {}
};

struct CapacityError : std::runtime_error {
  explicit CapacityError(const std::string& m) : std::runtime_error(m) {}
};

struct SizeError : std::runtime_error {
  explicit SizeError(const std::string& m) : std::runtime_error(m) {}
};

struct ContractError : std::runtime_error {
  explicit ContractError(const std::string& m) : std::runtime_error(m) {}
};

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& m) : std::runtime_error(m) {}
};

}  // namespace dynmsf
