#ifndef VRLAB_ERRORS_HPP
#define VRLAB_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace vrlab {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad argument or violated precondition.
struct InvalidArgument : Error {
  using Error::Error;
};

// Non-finite values encountered where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

// An example was evaluated without a locked transform seed. Silent
// resampling is never allowed, so this is a hard error.
struct LockingViolation : Error {
  using Error::Error;
};

// The streaming inner loop has used up its budget of steps and a new
// mega-batch snapshot must be taken before stepping again.
struct SnapshotExpired : Error {
  using Error::Error;
};

// Too little data to produce the requested estimate.
struct InsufficientData : Error {
  using Error::Error;
};

// Curvature quotient requested at zero iterate distance.
struct UndefinedAtSnapshot : Error {
  using Error::Error;
};

// Config document could not be parsed; message names the key and line.
struct ParseError : Error {
  using Error::Error;
};

// File could not be read or written.
struct IoError : Error {
  using Error::Error;
};

// A plot was requested for a metric that no record carries.
struct EmptySeries : Error {
  using Error::Error;
};

}  // namespace vrlab

#endif  // VRLAB_ERRORS_HPP
