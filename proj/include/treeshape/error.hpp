#pragma once

#include <stdexcept>
#include <string>

namespace treeshape {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document (JSON syntax, wrong field types).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented invariant; the message names it.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Shapes or layouts of two operands do not agree.
class LayoutError : public Error {
 public:
  using Error::Error;
};

}  // namespace treeshape
