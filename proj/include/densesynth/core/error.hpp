#pragma once

#include <stdexcept>
#include <string>

namespace densesynth {

/// Base class for every error raised by the library. Stage failures in the
/// CLI map to exit status 1 whenever one of these escapes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violated a documented precondition (bad value, bad shape, bad file).
class InvalidInput : public Error {
 public:
  using Error::Error;
};

}  // namespace densesynth
