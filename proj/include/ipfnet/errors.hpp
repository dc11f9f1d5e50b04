#pragma once

#include <stdexcept>

namespace ipfnet {

/// Malformed or inconsistent user input (bad dimensions, negative values,
/// unparseable files). Mapped to exit code 3 by the command-line tool.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// An iterative solver hit its iteration cap without meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ipfnet
