#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgacc {

// Base for every error the library raises on purpose. The CLI maps each
// subclass to its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or inconsistent configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Malformed input file; carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Snapshot / archive integrity failures.
class ChecksumError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

// Annotation backend failed or timed out.
class BackendError : public Error {
 public:
  using Error::Error;
};

}  // namespace kgacc
