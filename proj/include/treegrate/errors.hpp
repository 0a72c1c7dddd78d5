#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace treegrate {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation (NaN key, p > 1, n = 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Malformed JSON. `byte_offset` points at the offending byte.
class ParseError : public Error {
 public:
  ParseError(std::string const& what, std::size_t byte_offset)
      : Error(what), byte_offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// Well-formed JSON that does not follow the model schema. `path` is a JSON pointer.
class SchemaError : public Error {
 public:
  SchemaError(std::string path, std::string const& what)
      : Error(path + ": " + what), path_(std::move(path)) {}
  std::string const& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Schema-valid document describing an invalid ensemble.
class ModelError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input-vector file or vector of the wrong arity.
class InputError : public Error {
 public:
  using Error::Error;
};

// External C toolchain failed to compile the emitted unit.
class ToolchainError : public Error {
 public:
  ToolchainError(std::string const& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}
  std::string const& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

// Compiled harness produced output that does not follow the harness format.
class HarnessError : public Error {
 public:
  using Error::Error;
};

}  // namespace treegrate
