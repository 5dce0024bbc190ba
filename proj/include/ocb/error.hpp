#pragma once

#include <stdexcept>
#include <string>

namespace ocb {

/// Invalid user input: parameters, configuration keys, grid shapes.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not reach its target (quadrature, fixed point,
/// imaginary-time convergence).
class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The wavefunction solver produced an unusable state (NaN, window too small).
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ocb
