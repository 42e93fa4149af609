#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace stairs {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class InvalidDimension : public InvalidParameter {
 public:
  using InvalidParameter::InvalidParameter;
};

/// Arguments outside the region where a formula is valid.
class DomainError : public Error {
 public:
  using Error::Error;
};

class InvalidState : public Error {
 public:
  using Error::Error;
};

class NumericalAccuracy : public Error {
 public:
  NumericalAccuracy(const std::string& what, double achieved)
      : Error(what + " (achieved " + std::to_string(achieved) + ")"), achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// The activation does not satisfy the sign conditions c2 > 0, c4 < 0 for the data at hand.
class AssumptionViolation : public Error {
 public:
  using Error::Error;
};

/// Training produced non-finite numbers.
class Divergence : public Error {
 public:
  Divergence(const std::string& what, std::int64_t step)
      : Error(what + " at step " + std::to_string(step)), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace stairs
