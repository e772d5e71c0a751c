#pragma once

#include <stdexcept>
#include <string>

namespace fedmra {

// Base for everything the library throws. Callers that only care about
// "did the experiment fail" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument or invariant violation detected at an API boundary.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Two parameter vectors / matrices that should agree in layout do not.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Training produced a non-finite value.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedmra
