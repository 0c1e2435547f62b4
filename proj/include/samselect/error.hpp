#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace samselect {

// Base of every error the library throws. The CLI maps the three families
// below onto exit codes 2, 3 and 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user configuration: flags, config files, malformed expressions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data that violates a contract: shapes, bands, annotations, prompts.
class DataError : public Error {
 public:
  using Error::Error;
};

// Segmenter backend failures: missing models, inference errors.
class BackendError : public Error {
 public:
  using Error::Error;
};

// Syntax error in a visualization expression. `position` is the 0-based
// character offset of the offending token in the original text.
class ParseError : public ConfigError {
 public:
  ParseError(const std::string& message, std::size_t position)
      : ConfigError(message + " at position " + std::to_string(position)),
        position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

}  // namespace samselect
