#include "qmon/observables.hpp"

#include <bit>
#include <stdexcept>

#include "qmon/operators.hpp"

namespace qmon {

std::vector<double> readout_times(double t_end, std::size_t points) {
  if (points < 2) throw ValidationError("readout_points: need at least 2 readouts");
  if (!(t_end > 0.0)) throw ValidationError("t_end: must be > 0");
  std::vector<double> t(points);
  for (std::size_t k = 0; k < points; ++k)
    t[k] = t_end * static_cast<double>(k) / static_cast<double>(points - 1);
  return t;
}

std::uint64_t fnv1a_mix(std::uint64_t hash, double value) {
  const auto bits = std::bit_cast<std::uint64_t>(value);
  for (int byte = 0; byte < 8; ++byte) {
    hash ^= (bits >> (8 * byte)) & 0xffu;
    hash *= 1099511628211ull;
  }
  return hash;
}

ObservableTable::ObservableTable(const SystemSpec& spec, std::shared_ptr<const FockBasis> basis)
    : spec_(spec), basis_(std::move(basis)) {
  if (!basis_) return;  // product-state recording only
  const auto dim = basis_->dimension();
  xcm_.resize(dim);
  rel_sq_.setZero(dim);
  const int sites = basis_->sites();
  const int n_particles = basis_->particles();
  for (std::size_t k = 0; k < dim; ++k) {
    const auto n = basis_->occupations(k);
    double sum = 0.0;
    for (int m = 0; m < sites; ++m) sum += spec_.coordinate(m) * n[m];
    xcm_[k] = sum / n_particles;
    if (n_particles != 2) continue;
    if (basis_->statistics() == Statistics::Distinguishable) {
      const double r = basis_->position(k, 0) - basis_->position(k, 1);
      rel_sq_[k] = r * r;
    } else {
      double acc = 0.0;
      for (int m = 0; m < sites; ++m) {
        if (n[m] == 0) continue;
        for (int l = 0; l < sites; ++l)
          if (n[l] != 0) acc += static_cast<double>((m - l) * (m - l)) * n[m] * n[l];
      }
      rel_sq_[k] = acc / (n_particles * (n_particles - 1));
    }
  }
}

TrajectoryRecord ObservableTable::make_record(std::span<const double> times,
                                              const RecordOptions& options) const {
  TrajectoryRecord rec;
  rec.statistics = spec_.statistics;
  rec.sites = spec_.sites;
  rec.particles = spec_.particles;
  rec.times.assign(times.begin(), times.end());
  const auto rows = static_cast<Eigen::Index>(times.size());
  rec.density = Eigen::MatrixXd::Zero(rows, spec_.sites);
  rec.xcm.assign(times.size(), 0.0);
  rec.xcm_variance.assign(times.size(), 0.0);
  if (spec_.particles == 2) rec.sigma_r2.assign(times.size(), 0.0);
  if (options.pair_correlation)
    rec.pair_correlation.assign(times.size(), Eigen::MatrixXd::Zero(spec_.sites, spec_.sites));
  rec.noise_checksum = kFnvOffset;
  return rec;
}

void ObservableTable::record(const RealVector& p, std::size_t row, TrajectoryRecord& rec,
                             const RecordOptions& options) const {
  if (!basis_) throw std::logic_error("observable table was built without a basis");
  const int sites = basis_->sites();
  Eigen::VectorXd density = Eigen::VectorXd::Zero(sites);
  Eigen::MatrixXd* pairs = options.pair_correlation ? &rec.pair_correlation.at(row) : nullptr;
  if (pairs) pairs->setZero();
  for (std::size_t k = 0; k < basis_->dimension(); ++k) {
    const double w = p[k];
    if (w == 0.0) continue;
    const auto n = basis_->occupations(k);
    for (int m = 0; m < sites; ++m) {
      if (n[m] == 0) continue;
      density[m] += w * n[m];
      if (pairs)
        for (int l = 0; l < sites; ++l)
          if (n[l] != 0) (*pairs)(m, l) += w * n[m] * n[l];
    }
  }
  rec.density.row(row) = density.transpose();
  const double mean = p.dot(xcm_);
  rec.xcm[row] = mean;
  rec.xcm_variance[row] = std::max(0.0, p.dot(xcm_.cwiseAbs2()) - mean * mean);
  if (!rec.sigma_r2.empty()) rec.sigma_r2[row] = p.dot(rel_sq_);
}

void ObservableTable::record_product(std::span<const ComplexVector> factors, std::size_t row,
                                     TrajectoryRecord& rec, const RecordOptions& options) const {
  const int sites = spec_.sites;
  const int n_particles = static_cast<int>(factors.size());
  Eigen::VectorXd coord(sites);
  for (int m = 0; m < sites; ++m) coord[m] = spec_.coordinate(m);

  std::vector<Eigen::VectorXd> marginal(n_particles);
  std::vector<double> mean(n_particles), second(n_particles);
  Eigen::VectorXd density = Eigen::VectorXd::Zero(sites);
  double xcm = 0.0, var = 0.0;
  for (int i = 0; i < n_particles; ++i) {
    marginal[i] = factors[i].cwiseAbs2();
    marginal[i] /= marginal[i].sum();
    density += marginal[i];
    mean[i] = marginal[i].dot(coord);
    second[i] = marginal[i].dot(coord.cwiseAbs2());
    xcm += mean[i];
    var += second[i] - mean[i] * mean[i];
  }
  rec.density.row(row) = density.transpose();
  rec.xcm[row] = xcm / n_particles;
  rec.xcm_variance[row] = std::max(0.0, var / (n_particles * n_particles));
  if (!rec.sigma_r2.empty()) rec.sigma_r2[row] = second[0] + second[1] - 2.0 * mean[0] * mean[1];
  if (options.pair_correlation) {
    auto& pairs = rec.pair_correlation.at(row);
    pairs.setZero();
    for (int i = 0; i < n_particles; ++i) {
      pairs.diagonal() += marginal[i];
      for (int j = 0; j < n_particles; ++j)
        if (j != i) pairs += marginal[i] * marginal[j].transpose();
    }
  }
}

Eigen::MatrixXd pair_correlation(const FockBasis& basis, const StateVector& state) {
  if (static_cast<std::size_t>(state.size()) != basis.dimension())
    throw DimensionError("state length does not match basis dimension");
  const int sites = basis.sites();
  Eigen::MatrixXd pairs = Eigen::MatrixXd::Zero(sites, sites);
  for (std::size_t k = 0; k < basis.dimension(); ++k) {
    const double w = std::norm(state[k]);
    if (w == 0.0) continue;
    const auto n = basis.occupations(k);
    for (int m = 0; m < sites; ++m) {
      if (n[m] == 0) continue;
      for (int l = 0; l < sites; ++l)
        if (n[l] != 0) pairs(m, l) += w * n[m] * n[l];
    }
  }
  return pairs;
}

}  // namespace qmon
