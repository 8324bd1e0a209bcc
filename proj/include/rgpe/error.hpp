#pragma once

#include <stdexcept>
#include <string>

namespace rgpe {

// Bad input: malformed grids, configs, scheme names, mismatched shapes.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// A time integration produced non-finite values.
class DivergenceError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Any other failure while running (I/O, failed self-checks).
class RuntimeError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace rgpe
