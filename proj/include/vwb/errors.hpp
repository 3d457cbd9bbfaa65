#pragma once

#include <stdexcept>
#include <string>

namespace vwb {

// Base class so callers can catch everything thrown by the library in one place.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

struct ResourceLimit : Error {
  using Error::Error;
};

struct NotClosed : Error {
  using Error::Error;
};

struct AccuracyError : Error {
  double achieved = 0.0;
  AccuracyError(const std::string& what, double achieved_residual)
      : Error(what), achieved(achieved_residual) {}
};

struct StabilityError : Error {
  using Error::Error;
};

struct InsufficientData : Error {
  using Error::Error;
};

struct Corruption : Error {
  using Error::Error;
};

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw InvalidArgument(msg);
}

}  // namespace vwb
