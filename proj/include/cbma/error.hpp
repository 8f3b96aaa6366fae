#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cbma {

/// Base class for every error raised by the toolkit. `kind()` is a stable
/// tag used by the command-line front end for machine-readable error records.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

/// Malformed input text. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
public:
  ParseError(const std::string& message, std::size_t line = 0);
  std::size_t line() const noexcept { return line_; }
  const char* kind() const noexcept override { return "ParseError"; }

private:
  std::size_t line_;
};

class ValidationError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "ValidationError"; }
};

class IoError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "IoError"; }
};

class ConfigError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "ConfigError"; }
};

class NumericError : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "NumericError"; }
};

/// Raised when a cached null distribution or a null/statistic pair was built
/// from a different configuration.
class FingerprintMismatch : public Error {
public:
  using Error::Error;
  const char* kind() const noexcept override { return "FingerprintMismatch"; }
};

/// Emits a warning line on standard error. Tests may redirect it.
void warn(const std::string& message);

using WarningSink = void (*)(const std::string&);
WarningSink set_warning_sink(WarningSink sink);

}  // namespace cbma
