#include "qmon/operators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace qmon {

namespace {

// Sign of c+_to c_from acting on occupation vector n (Jordan-Wigner, sites
// ordered 0..M-1). Counts occupied sites strictly before each operator at the
// moment it acts.
int jordan_wigner_sign(std::span<const int> n, int to, int from) {
  int parity = 0;
  for (int j = 0; j < from; ++j) parity += n[j];
  for (int j = 0; j < to; ++j) parity += (j == from) ? 0 : n[j];
  return (parity % 2 == 0) ? 1 : -1;
}

using Triplet = Eigen::Triplet<Complex>;

void hop_indistinguishable(const SystemSpec& spec, const FockBasis& basis,
                           std::vector<Triplet>& triplets) {
  const bool fermion = spec.statistics == Statistics::Fermion;
  std::vector<int> target;
  for (std::size_t k = 0; k < basis.dimension(); ++k) {
    const auto n = basis.occupations(k);
    for (int m = 0; m + 1 < spec.sites; ++m) {
      for (auto [to, from] : {std::pair{m, m + 1}, std::pair{m + 1, m}}) {
        if (n[from] == 0) continue;
        if (fermion && n[to] != 0) continue;
        target.assign(n.begin(), n.end());
        --target[from];
        ++target[to];
        double amplitude;
        if (fermion) {
          amplitude = jordan_wigner_sign(n, to, from);
        } else {
          amplitude = std::sqrt(static_cast<double>(n[from]) * (n[to] + 1));
        }
        const auto row = basis.index_of(target);
        triplets.emplace_back(static_cast<int>(*row), static_cast<int>(k),
                              Complex(-spec.hopping * amplitude, 0.0));
      }
    }
    if (!fermion && spec.interaction != 0.0) {
      double onsite = 0.0;
      for (int m = 0; m < spec.sites; ++m) onsite += 0.5 * n[m] * (n[m] - 1);
      if (onsite != 0.0)
        triplets.emplace_back(static_cast<int>(k), static_cast<int>(k),
                              Complex(spec.interaction * onsite, 0.0));
    }
  }
}

void hop_distinguishable(const SystemSpec& spec, const FockBasis& basis,
                         std::vector<Triplet>& triplets) {
  std::vector<int> target;
  for (std::size_t k = 0; k < basis.dimension(); ++k) {
    const auto& x = basis.state(k);
    for (int i = 0; i < spec.particles; ++i) {
      for (int step : {-1, 1}) {
        const int moved = x[i] + step;
        if (moved < 0 || moved >= spec.sites) continue;
        target = x;
        target[i] = moved;
        const auto row = basis.index_of(target);
        triplets.emplace_back(static_cast<int>(*row), static_cast<int>(k),
                              Complex(-spec.hopping, 0.0));
      }
    }
  }
}

}  // namespace

OperatorMatrix OperatorMatrix::diagonal(RealVector entries) {
  return OperatorMatrix(std::move(entries), true);
}

OperatorMatrix OperatorMatrix::sparse(SparseMatrix entries, bool hermitian) {
  entries.makeCompressed();
  return OperatorMatrix(std::move(entries), hermitian);
}

std::size_t OperatorMatrix::dimension() const {
  if (is_diagonal()) return static_cast<std::size_t>(std::get<RealVector>(storage_).size());
  return static_cast<std::size_t>(std::get<SparseMatrix>(storage_).rows());
}

const RealVector& OperatorMatrix::diagonal_entries() const {
  if (!is_diagonal()) throw std::logic_error("operator is not diagonal");
  return std::get<RealVector>(storage_);
}

const SparseMatrix& OperatorMatrix::sparse_entries() const {
  if (is_diagonal()) throw std::logic_error("operator is diagonal");
  return std::get<SparseMatrix>(storage_);
}

SparseMatrix OperatorMatrix::to_sparse() const {
  if (!is_diagonal()) return std::get<SparseMatrix>(storage_);
  const auto& d = std::get<RealVector>(storage_);
  SparseMatrix m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (Eigen::Index k = 0; k < d.size(); ++k) m.insert(k, k) = d[k];
  m.makeCompressed();
  return m;
}

DenseMatrix OperatorMatrix::to_dense() const {
  if (is_diagonal()) return std::get<RealVector>(storage_).cast<Complex>().asDiagonal();
  return DenseMatrix(std::get<SparseMatrix>(storage_));
}

void OperatorMatrix::apply(const ComplexVector& in, ComplexVector& out) const {
  if (static_cast<std::size_t>(in.size()) != dimension())
    throw DimensionError("operator of dimension " + std::to_string(dimension()) +
                         " applied to vector of length " + std::to_string(in.size()));
  if (is_diagonal()) {
    out = std::get<RealVector>(storage_).cwiseProduct(in);
  } else {
    out.noalias() = std::get<SparseMatrix>(storage_) * in;
  }
}

ComplexVector OperatorMatrix::operator*(const ComplexVector& in) const {
  ComplexVector out(in.size());
  apply(in, out);
  return out;
}

double OperatorMatrix::hermiticity_defect() const {
  if (is_diagonal()) return 0.0;
  const auto& m = std::get<SparseMatrix>(storage_);
  const SparseMatrix diff = m - SparseMatrix(m.adjoint());
  double worst = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  return worst;
}

OperatorMatrix build_hamiltonian(const SystemSpec& spec, const FockBasis& basis) {
  std::vector<Triplet> triplets;
  if (spec.statistics == Statistics::Distinguishable) {
    hop_distinguishable(spec, basis, triplets);
  } else {
    hop_indistinguishable(spec, basis, triplets);
  }
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  SparseMatrix h(dim, dim);
  h.setFromTriplets(triplets.begin(), triplets.end());
  return OperatorMatrix::sparse(std::move(h), true);
}

OperatorMatrix build_number_operator(const FockBasis& basis, int site) {
  if (site < 0 || site >= basis.sites())
    throw IndexError("site " + std::to_string(site) + " out of range [0, " +
                     std::to_string(basis.sites()) + ")");
  RealVector d(basis.dimension());
  for (std::size_t k = 0; k < basis.dimension(); ++k) d[k] = basis.occupation(k, site);
  return OperatorMatrix::diagonal(std::move(d));
}

OperatorMatrix build_xcm_operator(const SystemSpec& spec, const FockBasis& basis) {
  RealVector d(basis.dimension());
  for (std::size_t k = 0; k < basis.dimension(); ++k) {
    double sum = 0.0;
    const auto n = basis.occupations(k);
    for (int m = 0; m < basis.sites(); ++m) sum += spec.coordinate(m) * n[m];
    d[k] = sum / basis.particles();
  }
  return OperatorMatrix::diagonal(std::move(d));
}

OperatorMatrix build_position_operator(const SystemSpec& spec, const FockBasis& basis,
                                       int particle) {
  if (basis.statistics() != Statistics::Distinguishable)
    throw StatisticsError("single-particle position operators need distinguishable particles");
  if (particle < 0 || particle >= basis.particles())
    throw IndexError("particle " + std::to_string(particle) + " out of range");
  RealVector d(basis.dimension());
  for (std::size_t k = 0; k < basis.dimension(); ++k)
    d[k] = spec.coordinate(basis.position(k, particle));
  return OperatorMatrix::diagonal(std::move(d));
}

OperatorMatrix identity_operator(std::size_t dimension) {
  return OperatorMatrix::diagonal(RealVector::Ones(static_cast<Eigen::Index>(dimension)));
}

Complex expectation(const OperatorMatrix& op, const StateVector& state) {
  if (static_cast<std::size_t>(state.size()) != op.dimension())
    throw DimensionError("state length does not match operator dimension");
  if (op.is_diagonal()) {
    const auto& d = op.diagonal_entries();
    return Complex(d.dot(state.cwiseAbs2()), 0.0);
  }
  return state.dot(op * state);
}

Complex expectation(const OperatorMatrix& op, const DensityMatrix& rho) {
  if (static_cast<std::size_t>(rho.rows()) != op.dimension() || rho.rows() != rho.cols())
    throw DimensionError("density matrix shape does not match operator dimension");
  if (op.is_diagonal())
    return (rho.diagonal().array() * op.diagonal_entries().cast<Complex>().array()).sum();
  return DenseMatrix(op.to_sparse() * rho).trace();
}

StateVector product_state(const FockBasis& basis, std::span<const ComplexVector> factors) {
  if (basis.statistics() != Statistics::Distinguishable)
    throw StatisticsError("product states are defined on distinguishable bases");
  if (static_cast<int>(factors.size()) != basis.particles())
    throw DimensionError("need one factor per particle");
  for (const auto& f : factors)
    if (f.size() != basis.sites()) throw DimensionError("factor length must equal the site count");
  StateVector psi(basis.dimension());
  for (std::size_t k = 0; k < basis.dimension(); ++k) {
    Complex amp(1.0, 0.0);
    for (int i = 0; i < basis.particles(); ++i) amp *= factors[i][basis.state(k)[i]];
    psi[k] = amp;
  }
  return psi;
}

StateVector basis_state(const FockBasis& basis, const std::vector<int>& state) {
  const auto idx = basis.index_of(state);
  if (!idx) throw IndexError("state is not part of the basis");
  StateVector psi = StateVector::Zero(basis.dimension());
  psi[*idx] = 1.0;
  return psi;
}

}  // namespace qmon
