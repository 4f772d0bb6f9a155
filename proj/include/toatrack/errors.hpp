#pragma once

#include <stdexcept>
#include <string>

namespace toatrack {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file; message carries line/field location.
class ParseError : public Error {
 public:
  using Error::Error;
};

// File could not be opened or written.
class IoError : public Error {
 public:
  using Error::Error;
};

// Structurally well-formed input that violates a documented invariant.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

// Scenario or command configuration is inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// An emission position coincides with an observation point.
class SourceOnSensor : public Error {
 public:
  using Error::Error;
};

// Emission or sensor index outside the data dimensions.
class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

// Square event system is numerically singular (pivot below threshold).
class SingularSystem : public Error {
 public:
  using Error::Error;
};

// Rectangular event system has numerical column rank < 4.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

// Grid-search minimizer ended on the search box boundary.
class BoxTooSmall : public Error {
 public:
  using Error::Error;
};

// Log-log fit has no horizontal spread.
class DegenerateFit : public Error {
 public:
  using Error::Error;
};

}  // namespace toatrack
