#pragma once

#include <stdexcept>
#include <string>

namespace nowcast {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data that cannot be used: malformed files, inconsistent sequences,
/// shape mismatches, too little history.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A configuration value outside its declared range or an unknown key.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Factorization or linear-solve failure (non-SPD precision, singular system).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace nowcast
