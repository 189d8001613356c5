#pragma once

#include <stdexcept>
#include <string>

namespace ccid {

/// Raised for malformed inputs: bad arguments, ill-formed files, shape
/// mismatches. Messages are single-line diagnostics suitable for the CLI.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a computation produces NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace ccid
