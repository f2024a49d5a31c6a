#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace opl {

/// Base error carrying a short machine-readable code next to the message.
/// Codes are stable tokens (e.g. "single-class", "propensity-range") that
/// callers and the CLI can branch on without parsing prose.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Bad inputs: malformed data, violated preconditions, out-of-range values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Filesystem and stream failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace opl
