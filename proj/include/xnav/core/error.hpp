#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace xnav {

/// Base for every domain error raised by the library. The CLI maps these to
/// exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Scenario or configuration value that violates an invariant. `fields`
/// carries the JSON paths involved, e.g. "constants.d_safe".
class ValidationError : public Error {
 public:
  ValidationError(std::vector<std::string> fields, const std::string& what);

  const std::vector<std::string>& fields() const noexcept { return fields_; }

 private:
  std::vector<std::string> fields_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace xnav
