#include "qmon/unitary.hpp"

#include <cmath>

namespace qmon {

namespace {

void rk4_step(const OperatorMatrix& h, StateVector& psi, double dt) {
  const Complex mi(0.0, -1.0);
  StateVector k1 = mi * (h * psi);
  StateVector k2 = mi * (h * StateVector(psi + 0.5 * dt * k1));
  StateVector k3 = mi * (h * StateVector(psi + 0.5 * dt * k2));
  StateVector k4 = mi * (h * StateVector(psi + dt * k3));
  psi += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

std::pair<std::uint64_t, double> split(double interval, double dt_max) {
  const double steps = std::max(1.0, std::ceil(interval / dt_max * (1.0 - 1e-12)));
  return {static_cast<std::uint64_t>(steps), interval / steps};
}

}  // namespace

double default_unitary_dt(const SystemSpec& spec) {
  return spec.hopping != 0.0 ? 0.0025 / std::abs(spec.hopping) : 1.0;
}

UnitarySimulator::UnitarySimulator(const SystemSpec& spec, std::shared_ptr<const FockBasis> basis)
    : spec_(spec), basis_(std::move(basis)) {
  spec_.validate();
  if (!basis_ && basis_dimension(spec_.statistics, spec_.sites, spec_.particles) <= kDefaultBasisCap)
    basis_ = std::make_shared<const FockBasis>(enumerate_basis(spec_));
  if (basis_) hamiltonian_ = std::make_shared<const OperatorMatrix>(build_hamiltonian(spec_, *basis_));
  if (spec_.statistics == Statistics::Distinguishable) {
    SystemSpec one = spec_;
    one.particles = 1;
    single_hamiltonian_ =
        std::make_shared<const OperatorMatrix>(build_hamiltonian(one, enumerate_basis(one)));
  }
}

StateVector UnitarySimulator::evolve(const StateVector& initial, double t, double dt) const {
  if (!hamiltonian_) throw CapacityError("basis too large for a full state vector");
  if (static_cast<std::size_t>(initial.size()) != hamiltonian_->dimension())
    throw DimensionError("initial state length does not match basis dimension");
  StateVector psi = initial;
  if (t <= 0.0) return psi;
  const auto [steps, h] = split(t, dt > 0.0 ? dt : default_unitary_dt(spec_));
  for (std::uint64_t s = 0; s < steps; ++s) rk4_step(*hamiltonian_, psi, h);
  return psi;
}

TrajectoryRecord UnitarySimulator::run(const InitialState& initial, double t_end,
                                       const RecordOptions& options, double dt) const {
  const auto times = readout_times(t_end, options.readout_points);
  const auto [steps, h] = split(times[1] - times[0], dt > 0.0 ? dt : default_unitary_dt(spec_));
  const bool product = initial.is_product() && !options.pair_correlation && !options.final_projector;

  if (product) {
    if (spec_.statistics != Statistics::Distinguishable)
      throw StatisticsError("product initial states need distinguishable particles");
    ObservableTable table(spec_, nullptr);
    auto rec = table.make_record(times, options);
    std::vector<ComplexVector> psi(initial.factors.begin(), initial.factors.end());
    for (auto& f : psi) {
      if (f.size() != spec_.sites) throw DimensionError("factor length must equal the site count");
      normalize(f);
    }
    table.record_product(psi, 0, rec, options);
    for (std::size_t row = 1; row < times.size(); ++row) {
      for (auto& f : psi)
        for (std::uint64_t s = 0; s < steps; ++s) rk4_step(*single_hamiltonian_, f, h);
      table.record_product(psi, row, rec, options);
    }
    return rec;
  }

  if (!hamiltonian_) throw CapacityError("basis too large for a full state vector");
  StateVector psi = initial.is_product() ? product_state(*basis_, initial.factors) : initial.full;
  if (static_cast<std::size_t>(psi.size()) != basis_->dimension())
    throw DimensionError("initial state length does not match basis dimension");
  normalize(psi);
  ObservableTable table(spec_, basis_);
  auto rec = table.make_record(times, options);
  table.record(psi.cwiseAbs2(), 0, rec, options);
  if (options.pair_correlation) rec.pair_correlation[0] = pair_correlation(*basis_, psi);
  for (std::size_t row = 1; row < times.size(); ++row) {
    for (std::uint64_t s = 0; s < steps; ++s) rk4_step(*hamiltonian_, psi, h);
    table.record(psi.cwiseAbs2(), row, rec, options);
    if (options.pair_correlation) rec.pair_correlation[row] = pair_correlation(*basis_, psi);
  }
  if (options.final_projector) rec.final_projector = psi * psi.adjoint();
  return rec;
}

}  // namespace qmon
