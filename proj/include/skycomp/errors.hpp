#pragma once

#include <stdexcept>
#include <string>

namespace skycomp {

// Bad or inconsistent configuration / experiment setup.  CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure (degenerate channel statistics, solver breakdown).
// CLI exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Channel matrix too ill-conditioned for ZF inversion; callers typically
// resample the draw.
struct SingularChannelError : NumericalError {
  using NumericalError::NumericalError;
};

// Filesystem / output failure.  CLI exit code 4.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace skycomp
