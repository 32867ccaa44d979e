#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace la {

// Base class for every error raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidShape : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// A per-query denominator g_i fell below the precision's epsilon.
class DegenerateDenominator : public Error {
 public:
  DegenerateDenominator(std::int64_t group, std::int64_t position)
      : Error("degenerate attention denominator at group " + std::to_string(group) +
              ", position " + std::to_string(position)),
        group_(group),
        position_(position) {}

  std::int64_t group() const { return group_; }
  std::int64_t position() const { return position_; }

 private:
  std::int64_t group_;
  std::int64_t position_;
};

class InvalidPlan : public Error {
 public:
  using Error::Error;
};

class InvalidPhase : public Error {
 public:
  using Error::Error;
};

class MeasurementNested : public Error {
 public:
  using Error::Error;
};

class MissingForwardState : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace la
