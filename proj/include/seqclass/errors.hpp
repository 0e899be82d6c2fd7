#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace seqclass {

// Base for every failure caused by input data (files, records, shapes).
// Contract violations by the caller (bad config values) use std::invalid_argument.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// A dataset record that does not follow the JSON-lines schema.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class VersionError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Sequence with no real (non-PAD) token.
class EmptySequenceError : public Error {
 public:
  using Error::Error;
};

// Gradients requested from a cache whose model has changed since the forward pass.
class StaleCacheError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace seqclass
