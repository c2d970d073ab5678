#pragma once

#include <stdexcept>
#include <string>

namespace hcrf {

// Malformed or misaligned input data (files, clouds, flows).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration text or parameter values.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values produced during inference.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hcrf
