#pragma once

#include <stdexcept>
#include <string>

namespace sos {

/// Malformed input: bad dimensions, violated preconditions, unparseable
/// scenario files. Maps to CLI exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed (divergence, no Riccati convergence,
/// unstabilizable pair). Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sos
