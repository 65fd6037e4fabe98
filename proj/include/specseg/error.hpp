#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace specseg {

/// Base of every error thrown by the library. Callers that only need a
/// message can catch this; the subclasses let tests and the CLI tell the
/// failure classes apart.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad magic, version, dtype code, or otherwise unparseable header.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Declared dimensions disagree with the payload size.
class TruncationError : public Error {
 public:
  using Error::Error;
};

/// Payload parsed but holds values outside the type's invariants (NaN, Inf).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A feature vector with zero norm; cosine similarity is undefined there.
class DegenerateFeatureError : public Error {
 public:
  DegenerateFeatureError(std::size_t pixel, const std::string& what)
      : Error(what), pixel_(pixel) {}
  std::size_t pixel() const noexcept { return pixel_; }

 private:
  std::size_t pixel_;
};

/// Eigensolver exhausted its matvec budget. Carries the residuals reached.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::vector<double> residuals)
      : Error(what), residuals_(std::move(residuals)) {}
  const std::vector<double>& residuals() const noexcept { return residuals_; }

 private:
  std::vector<double> residuals_;
};

class DegeneratePartitionError : public Error {
 public:
  using Error::Error;
};

/// Requested more clusters than there are distinct points.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

/// Violated precondition on an argument (sizes, counts, ranges).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

}  // namespace specseg
