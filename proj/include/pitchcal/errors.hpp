#pragma once

#include <stdexcept>
#include <string>

namespace pitchcal {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input violates a geometric precondition (too few points, collinear, parallel...).
struct DegenerateInput : Error {
  using Error::Error;
};

// Estimation ran but produced no usable model.
struct EstimationFailure : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace pitchcal
