#pragma once

#include <stdexcept>
#include <string>

namespace dendrostate {

// Malformed or inconsistent input data: bad CSV rows, invariant violations,
// missing upstream artifacts.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration values or impossible settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failure inside a sampler or solver (non-PD precision,
// divergent variance, ...).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dendrostate
