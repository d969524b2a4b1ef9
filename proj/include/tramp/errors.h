#pragma once

#include <stdexcept>
#include <string>

namespace tramp {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

// Input parsed but violates an invariant (ragged frames, count mismatch).
class StructuralError : public Error {
 public:
  using Error::Error;
};

class GroupingError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite value produced while checked mode is on.
class NumericError : public Error {
 public:
  using Error::Error;
};

class OptimizerError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

// Spearman correlation requested on degenerate input.
class CorrelationError : public Error {
 public:
  using Error::Error;
};

class CheckFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace tramp
