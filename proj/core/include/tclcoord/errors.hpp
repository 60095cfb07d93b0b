#pragma once

#include <stdexcept>
#include <string>

namespace tclcoord {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A model or argument breaks a documented invariant (bad bounds, ragged
// rows, inadmissible input, histogram mismatch, ...).
struct ModelError : Error {
  using Error::Error;
};

// Numerical breakdown: simplex pivot collapse, power-flow divergence.
struct NumericError : Error {
  using Error::Error;
};

// Scenario / feeder / reference files that fail validation.  The message
// names the offending field path.
struct ConfigError : Error {
  using Error::Error;
};

}  // namespace tclcoord
