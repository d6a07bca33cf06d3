#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace qmon {

using Complex = std::complex<double>;
using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using DenseMatrix = Eigen::MatrixXcd;
using SparseMatrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;

/// Amplitudes over a FockBasis. Normalization is the caller's responsibility;
/// see normalize().
using StateVector = ComplexVector;

/// Hermitian, unit-trace matrix over a FockBasis.
using DensityMatrix = DenseMatrix;

inline constexpr const char* kVersion = "0.1.0";

// Error hierarchy. Every failure raised by the library derives from Error so
// callers can catch one type; the subclasses name the contract that broke.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class StatisticsError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class StepError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// Raised by ensemble runs; carries the index of the failing trajectory.
class TrajectoryError : public Error {
 public:
  TrajectoryError(std::uint64_t index, const std::string& what)
      : Error("trajectory " + std::to_string(index) + ": " + what), index_(index) {}
  std::uint64_t index() const noexcept { return index_; }

 private:
  std::uint64_t index_;
};

/// Squared norm rescaled to one. Throws DegenerateError on a zero vector.
void normalize(StateVector& state);

}  // namespace qmon
