#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wassdyn {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values, negative weights, malformed input files.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Nothing left after dropping zero-weight atoms.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// Internal failure of the transport solver or an oversized problem.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Parse failure with the byte offset of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Domain error during numeric evaluation (sqrt of a negative, division by zero, ...).
class EvalError : public Error {
 public:
  using Error::Error;
};

}  // namespace wassdyn
