#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace spdstats {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dimension or size mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A matrix left the SPD cone (or was never in it).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what, double min_eigenvalue = 0.0,
                       std::ptrdiff_t index = -1)
      : Error(what), min_eigenvalue_(min_eigenvalue), index_(index) {}

  double min_eigenvalue() const noexcept { return min_eigenvalue_; }
  /// Position of the offending element in a list, or -1.
  std::ptrdiff_t index() const noexcept { return index_; }

 private:
  double min_eigenvalue_;
  std::ptrdiff_t index_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An operation was called before its input representation existed.
class StateError : public Error {
 public:
  using Error::Error;
};

class UnsupportedMetric : public Error {
 public:
  using Error::Error;
};

class DegenerateGroupError : public Error {
 public:
  using Error::Error;
};

class SingularScatterError : public Error {
 public:
  using Error::Error;
};

/// Missing, unreadable or malformed input files.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace spdstats
