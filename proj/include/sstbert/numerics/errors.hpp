#pragma once

#include <stdexcept>
#include <string>

namespace sstbert::numerics {

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeMismatch : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

class IndexOutOfRange : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

class InvalidProbability : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

class LabelOutOfRange : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

class NotScalar : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

class NoActiveTape : public NumericsError {
 public:
  using NumericsError::NumericsError;
};

}  // namespace sstbert::numerics
