#pragma once

#include <variant>

#include "qmon/basis.hpp"
#include "qmon/core.hpp"
#include "qmon/system.hpp"

namespace qmon {

/// Immutable operator over a FockBasis.
///
/// Observables that are diagonal in the Fock basis (n_m, X_CM, x_i, the
/// measurement operators) are stored as a real diagonal; everything else is a
/// row-major sparse matrix. Dense copies are produced on demand for the
/// master-equation oracles.
class OperatorMatrix {
 public:
  static OperatorMatrix diagonal(RealVector entries);
  static OperatorMatrix sparse(SparseMatrix entries, bool hermitian);

  std::size_t dimension() const;
  bool is_diagonal() const { return std::holds_alternative<RealVector>(storage_); }
  bool hermitian() const { return hermitian_; }

  /// Throws std::logic_error when the operator is not diagonal.
  const RealVector& diagonal_entries() const;
  /// Throws std::logic_error when the operator is diagonal.
  const SparseMatrix& sparse_entries() const;
  SparseMatrix to_sparse() const;
  DenseMatrix to_dense() const;

  /// out = A * in. `out` must not alias `in`.
  void apply(const ComplexVector& in, ComplexVector& out) const;
  ComplexVector operator*(const ComplexVector& in) const;

  /// Largest |A - A^dagger| entry.
  double hermiticity_defect() const;

 private:
  OperatorMatrix(std::variant<RealVector, SparseMatrix> storage, bool hermitian)
      : storage_(std::move(storage)), hermitian_(hermitian) {}

  std::variant<RealVector, SparseMatrix> storage_;
  bool hermitian_;
};

/// -J sum_m (a+_m a_{m+1} + h.c.) + (U/2) sum_m n_m (n_m - 1), open chain.
///
/// Fermion amplitudes use the Jordan-Wigner ordering c+_0 c+_1 ... c+_{M-1};
/// for nearest-neighbour hops on an open chain the string is empty, so every
/// hop carries sign +1 before the -J. Distinguishable particles hop
/// independently and do not interact.
OperatorMatrix build_hamiltonian(const SystemSpec& spec, const FockBasis& basis);

OperatorMatrix build_number_operator(const FockBasis& basis, int site);

/// sum_m x_m n_m / N with x_m = spec.coordinate(m).
OperatorMatrix build_xcm_operator(const SystemSpec& spec, const FockBasis& basis);

/// Position of particle i (0-based). Throws StatisticsError unless the basis
/// is distinguishable.
OperatorMatrix build_position_operator(const SystemSpec& spec, const FockBasis& basis,
                                       int particle);

OperatorMatrix identity_operator(std::size_t dimension);

Complex expectation(const OperatorMatrix& op, const StateVector& state);
Complex expectation(const OperatorMatrix& op, const DensityMatrix& rho);

/// Product-state amplitude |phi_0> (x) |phi_1> (x) ... over a distinguishable basis.
StateVector product_state(const FockBasis& basis, std::span<const ComplexVector> factors);

/// Basis vector for a given occupation vector / position tuple.
StateVector basis_state(const FockBasis& basis, const std::vector<int>& state);

}  // namespace qmon
