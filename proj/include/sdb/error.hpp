#pragma once

#include <stdexcept>
#include <string>

namespace sdb {

/// Invalid argument or inconsistent input passed to a library routine.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Singular factorization, unacceptable residual, NaN or blow-up.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sdb
