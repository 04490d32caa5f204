#pragma once

#include <stdexcept>
#include <string>

namespace sbe {

// Invalid user-facing configuration (bad flag value, violated parameter
// constraint).  The CLI maps this to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failures of the numerics themselves (trajectory blow-up, embedding or
// quadrature breakdown).  The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmbeddingError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class BlowUpError : public NumericalError {
 public:
  BlowUpError(const std::string& what, long step) : NumericalError(what), step(step) {}
  long step;
};

}  // namespace sbe
