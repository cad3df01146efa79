#pragma once

#include <stdexcept>
#include <string>

namespace netspill {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed inputs: bad files, bad configs, mismatched shapes.
struct InputError : Error {
  using Error::Error;
};

// Well-formed inputs on which a computation degenerates: singular designs,
// diverging series, corrections at a pole.
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace netspill
