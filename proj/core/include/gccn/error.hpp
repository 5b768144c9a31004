#pragma once

#include <stdexcept>
#include <string>

namespace gccn {

// Every failure raised by the library derives from Error. The CLI maps
// ConfigError and UsageError to exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape algebra does not work out (mismatched channels, underflow, odd dims).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A configuration value is out of its legal range.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The data is well formed but semantically unusable (bad label, empty class).
class DataError : public Error {
 public:
  using Error::Error;
};

// A file does not follow its binary layout (magic, version, fingerprint).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

// An object was used in a state that does not allow the call.
class StateError : public Error {
 public:
  using Error::Error;
};

// API contract violated by the caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf was produced.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gccn
