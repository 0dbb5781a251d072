#pragma once

#include <stdexcept>
#include <string>

namespace aecf {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad architecture / config / shape wiring.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or inconsistent input data.
struct DataError : Error {
  using Error::Error;
};

// NaN/Inf or other numeric breakdown.
struct NumericError : Error {
  using Error::Error;
};

// API misuse (wrong call order, wrong argument kind).
struct UsageError : Error {
  using Error::Error;
};

// Filesystem / serialization failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace aecf
