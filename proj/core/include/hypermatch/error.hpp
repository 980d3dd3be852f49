#pragma once

#include <stdexcept>
#include <string>

namespace hypermatch {

// Bad shapes, dimension/curvature mismatches, empty inputs.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A NaN or Inf was produced where the contract requires finite values.
class NumericFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An operation was invoked in the wrong lifecycle state (e.g. backward before forward).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class NotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or truncated binary/JSON input.
class CorruptData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hypermatch
