#pragma once

#include <stdexcept>
#include <string>

namespace lanesafe {

/// Raised when an argument lies outside the domain an operation is defined on.
class DomainError : public std::invalid_argument {
 public:
  explicit DomainError(const std::string& what) : std::invalid_argument(what) {}
};

/// Raised when an iterative numerical routine fails to converge or hits a
/// non-finite value.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised for malformed or inconsistent scenario configurations.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace lanesafe
