#pragma once

#include <stdexcept>
#include <string>

namespace spo {

// Bad input: malformed files, violated preconditions, mismatched shapes.
// The CLI maps this to exit code 1.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A computation produced a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

}  // namespace spo
