#pragma once

#include <stdexcept>
#include <string>

namespace rads {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Empty input where at least one sample/record is required.
struct EmptyInputError : Error {
  using Error::Error;
};

// Enough data to proceed is missing (fewer windows/points than the algorithm needs).
struct InsufficientDataError : Error {
  using Error::Error;
};

// Raised by min-max normalization when the value range collapses to a point.
struct DegenerateRangeError : Error {
  using Error::Error;
};

struct NotTrainedError : Error {
  using Error::Error;
};

// Verdict and truth window grids do not line up.
struct GridMismatchError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

struct DataFormatError : Error {
  using Error::Error;
};

// Stored model fails checksum or schema validation.
struct IntegrityError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace rads
