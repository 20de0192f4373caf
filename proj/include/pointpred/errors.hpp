#pragma once

#include <stdexcept>
#include <string>

namespace pointpred {

// Bad parameters or geometry (window/bin mismatch, out-of-range history length).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input data that cannot support the requested operation.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Iterative solvers that failed to converge, degenerate matrices.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Calling a model in a state that does not support the call (e.g. untrained).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

using ArgumentError = std::invalid_argument;

}  // namespace pointpred
