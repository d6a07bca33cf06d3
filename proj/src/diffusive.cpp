#include "qmon/diffusive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "qmon/format.hpp"
#include "qmon/rng.hpp"

namespace qmon {

namespace {

// Compressed-row copy of a real Hamiltonian for the fused step loop.
struct Csr {
  std::vector<int> row_ptr;
  std::vector<int> col;
  std::vector<double> val;

  static Csr from(const OperatorMatrix& op) {
    Csr c;
    const SparseMatrix m = op.to_sparse();
    c.row_ptr.assign(m.outerIndexPtr(), m.outerIndexPtr() + m.outerSize() + 1);
    c.col.assign(m.innerIndexPtr(), m.innerIndexPtr() + m.nonZeros());
    for (Eigen::Index k = 0; k < m.nonZeros(); ++k) {
      const Complex v = m.valuePtr()[k];
      if (v.imag() != 0.0) throw ValidationError("hamiltonian: the diffusive integrator needs real matrix elements");
      c.val.push_back(v.real());
    }
    return c;
  }
};

// Scratch state for one integration: channel observables A_c, rates k_c and
// the current expectations <A_c>. Every A_c is diagonal with few distinct
// values, so the backaction factors are tabulated per value.
struct Channels {
  std::vector<const double*> obs;
  std::vector<double> kappa;
  std::vector<double> sqrt_kappa;
  std::vector<double> mean;
  std::vector<std::vector<int>> level;      // basis state -> index into values
  std::vector<std::vector<double>> values;  // distinct eigenvalues of A_c
  std::vector<std::vector<double>> factor;  // per-step factor for each value

  void add(const double* a, Eigen::Index dim, double k) {
    obs.push_back(a);
    kappa.push_back(k);
    sqrt_kappa.push_back(std::sqrt(k));
    mean.push_back(0.0);
    std::vector<double> v(a, a + dim);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    std::vector<int> lv(static_cast<std::size_t>(dim));
    for (Eigen::Index i = 0; i < dim; ++i)
      lv[static_cast<std::size_t>(i)] =
          static_cast<int>(std::lower_bound(v.begin(), v.end(), a[i]) - v.begin());
    factor.emplace_back(v.size());
    values.push_back(std::move(v));
    level.push_back(std::move(lv));
  }

  void refresh_means(const StateVector& psi) {
    const auto dim = psi.size();
    for (std::size_t c = 0; c < obs.size(); ++c) {
      double m = 0.0;
      for (Eigen::Index k = 0; k < dim; ++k) m += std::norm(psi[k]) * obs[c][k];
      mean[c] = m;
    }
  }
};

// psi <- normalized update. `out` is scratch of the same size. On return
// chan.mean holds the expectations in the new state.
//
// The diagonal backaction 1 - (k/2) dA^2 dt + sqrt(k) dA dW of the
// Euler-Maruyama step is applied in exponential form
// exp(sqrt(k) dA dW - k dA^2 dt), which agrees with it through first order in
// dt and has the same Ito limit, but stays bounded for large |dA| where the
// linear factor would overshoot below -1 and amplify lattice tails.
void em_step(const Csr& h, Channels& chan, StateVector& psi, StateVector& out, const double* dW,
             double dt) {
  const auto dim = psi.size();
  const std::size_t nc = chan.obs.size();
  for (std::size_t c = 0; c < nc; ++c) {
    auto& f = chan.factor[c];
    const auto& v = chan.values[c];
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double delta = v[j] - chan.mean[c];
      f[j] = std::exp(chan.sqrt_kappa[c] * delta * dW[c] - chan.kappa[c] * delta * delta * dt);
    }
  }
  double norm2 = 0.0;
  double next_mean[8] = {0.0};
  for (Eigen::Index k = 0; k < dim; ++k) {
    double hre = 0.0, him = 0.0;
    for (int p = h.row_ptr[k]; p < h.row_ptr[k + 1]; ++p) {
      const Complex& z = psi[h.col[p]];
      hre += h.val[p] * z.real();
      him += h.val[p] * z.imag();
    }
    double scale = 1.0;
    for (std::size_t c = 0; c < nc; ++c) scale *= chan.factor[c][chan.level[c][k]];
    // -i dt (H psi)_k = dt (him - i hre)
    const Complex v(psi[k].real() * scale + dt * him, psi[k].imag() * scale - dt * hre);
    out[k] = v;
    const double p = std::norm(v);
    norm2 += p;
    for (std::size_t c = 0; c < nc; ++c) next_mean[c] += p * chan.obs[c][k];
  }
  const double norm = std::sqrt(norm2);
  if (!(std::abs(norm - 1.0) <= 0.1))
    throw StepError("diffusive step changed the norm by " + std::to_string(norm - 1.0) +
                    "; reduce dt");
  out *= 1.0 / norm;
  psi.swap(out);
  for (std::size_t c = 0; c < nc; ++c) chan.mean[c] = next_mean[c] / norm2;
}

double positive_min_scale(double hopping, double rate) {
  double scale = std::numeric_limits<double>::infinity();
  if (hopping != 0.0) scale = std::min(scale, 1.0 / std::abs(hopping));
  if (rate > 0.0) scale = std::min(scale, 1.0 / rate);
  return std::isfinite(scale) ? scale : 1.0;
}

constexpr std::size_t kMaxChannels = 8;

}  // namespace

std::string_view to_string(RateConvention c) {
  return c == RateConvention::EqualGamma ? "EqualGamma" : "EqualTotalRate";
}

RateConvention rate_convention_from_string(std::string_view name) {
  if (iequals(name, "EqualGamma")) return RateConvention::EqualGamma;
  if (iequals(name, "EqualTotalRate")) return RateConvention::EqualTotalRate;
  throw ValidationError("normalization_convention: unknown value '" + std::string(name) + "'");
}

double default_diffusive_dt(const SystemSpec& spec) {
  const double n = spec.particles;
  return 0.01 * positive_min_scale(spec.hopping, n * n * spec.measurement_strength());
}

DiffusiveParams DiffusiveParams::from_system(const SystemSpec& spec, RateConvention convention,
                                             std::vector<double> particle_rates) {
  DiffusiveParams p;
  const double geometry = spec.lattice_constant * spec.lattice_constant / (spec.sigma * spec.sigma);
  const double n = spec.particles;
  if (is_indistinguishable(spec.statistics)) {
    if (!particle_rates.empty())
      throw StatisticsError("per-particle rates need distinguishable particles");
    const double gamma = convention == RateConvention::EqualTotalRate ? spec.gamma / n : spec.gamma;
    p.kappa_cm = n * n * gamma * geometry / 2.0;
  } else {
    if (particle_rates.empty()) particle_rates.assign(spec.particles, spec.gamma);
    if (static_cast<int>(particle_rates.size()) != spec.particles)
      throw ValidationError("particle_rates: need one rate per particle");
    for (double g : particle_rates) p.kappa_rel.push_back(g * geometry / 2.0);
  }
  p.dt = default_diffusive_dt(spec);
  return p;
}

void DiffusiveParams::validate(const SystemSpec& spec) const {
  if (!(kappa_cm >= 0.0) || !std::isfinite(kappa_cm)) throw ValidationError("kappa_cm: must be >= 0");
  for (double k : kappa_rel)
    if (!(k >= 0.0) || !std::isfinite(k)) throw ValidationError("kappa_rel: must be >= 0");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ValidationError("dt: must be > 0");
  if (is_indistinguishable(spec.statistics)) {
    if (!kappa_rel.empty()) throw ValidationError("kappa_rel: not defined for indistinguishable runs");
  } else {
    if (static_cast<int>(kappa_rel.size()) != spec.particles)
      throw ValidationError("kappa_rel: need one rate per particle");
    if (spec.particles > static_cast<int>(kMaxChannels))
      throw ValidationError("particles: at most 8 distinguishable particles are supported");
  }
}

StateVector sse_step_indist(const StateVector& state, const OperatorMatrix& hamiltonian,
                            const OperatorMatrix& xcm, const DiffusiveParams& params, double dW) {
  if (static_cast<std::size_t>(state.size()) != hamiltonian.dimension() ||
      xcm.dimension() != hamiltonian.dimension())
    throw DimensionError("state and operators differ in dimension");
  const Csr h = Csr::from(hamiltonian);
  const RealVector& a = xcm.diagonal_entries();
  Channels chan;
  chan.add(a.data(), a.size(), params.kappa_cm);
  StateVector psi = state, out(state.size());
  chan.refresh_means(psi);
  em_step(h, chan, psi, out, &dW, params.dt);
  return psi;
}

StateVector sse_step_dist(const StateVector& state, const OperatorMatrix& hamiltonian,
                          std::span<const OperatorMatrix> positions, const DiffusiveParams& params,
                          std::span<const double> dW) {
  if (positions.size() != params.kappa_rel.size() || dW.size() != positions.size())
    throw DimensionError("need one position operator, rate and increment per particle");
  if (positions.size() > kMaxChannels) throw ValidationError("at most 8 particles are supported");
  for (const auto& x : positions)
    if (x.dimension() != hamiltonian.dimension())
      throw DimensionError("position operator dimension does not match the hamiltonian");
  if (static_cast<std::size_t>(state.size()) != hamiltonian.dimension())
    throw DimensionError("state length does not match operator dimension");
  const Csr h = Csr::from(hamiltonian);
  Channels chan;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const RealVector& x = positions[i].diagonal_entries();
    chan.add(x.data(), x.size(), params.kappa_rel[i]);
  }
  StateVector psi = state, out(state.size());
  chan.refresh_means(psi);
  em_step(h, chan, psi, out, dW.data(), params.dt);
  return psi;
}

struct DiffusiveSimulator::Full {
  std::shared_ptr<const FockBasis> basis;
  Csr hamiltonian;
  std::vector<RealVector> observables;  // X_CM, or x_i per particle
  ObservableTable table;
};

struct DiffusiveSimulator::Single {
  Csr hamiltonian;
  RealVector coordinate;
  ObservableTable table;
};

DiffusiveSimulator::DiffusiveSimulator(const SystemSpec& spec, DiffusiveParams params,
                                       std::shared_ptr<const FockBasis> basis)
    : spec_(spec), params_(std::move(params)) {
  spec_.validate();
  params_.validate(spec_);
  if (!basis && basis_dimension(spec_.statistics, spec_.sites, spec_.particles) <= kDefaultBasisCap)
    basis = std::make_shared<const FockBasis>(enumerate_basis(spec_));
  if (basis) {
    if (basis->sites() != spec_.sites || basis->particles() != spec_.particles ||
        basis->statistics() != spec_.statistics)
      throw DimensionError("basis does not match the system");
    std::vector<RealVector> obs;
    if (is_indistinguishable(spec_.statistics)) {
      obs.push_back(build_xcm_operator(spec_, *basis).diagonal_entries());
    } else {
      for (int i = 0; i < spec_.particles; ++i)
        obs.push_back(build_position_operator(spec_, *basis, i).diagonal_entries());
    }
    full_ = std::make_shared<const Full>(Full{basis, Csr::from(build_hamiltonian(spec_, *basis)),
                                              std::move(obs), ObservableTable(spec_, basis)});
  }
  if (spec_.statistics == Statistics::Distinguishable) {
    SystemSpec one = spec_;
    one.particles = 1;
    const auto single_basis = enumerate_basis(one);
    RealVector coord(spec_.sites);
    for (int m = 0; m < spec_.sites; ++m) coord[m] = spec_.coordinate(m);
    single_ = std::make_shared<const Single>(
        Single{Csr::from(build_hamiltonian(one, single_basis)), std::move(coord),
               ObservableTable(spec_, nullptr)});
  }
}

const DiffusiveSimulator::Full& DiffusiveSimulator::full() const {
  if (!full_) throw CapacityError("basis too large for a full state vector; use a product initial state");
  return *full_;
}

double DiffusiveSimulator::aligned_dt(double t_end, std::size_t points) const {
  const double interval = t_end / static_cast<double>(points - 1);
  const double steps = std::ceil(interval / params_.dt * (1.0 - 1e-12));
  return interval / std::max(1.0, steps);
}

TrajectoryRecord DiffusiveSimulator::run(const InitialState& initial, double t_end,
                                         std::uint64_t seed, std::uint64_t trajectory,
                                         const RecordOptions& options) const {
  if (initial.is_product()) {
    if (spec_.statistics != Statistics::Distinguishable)
      throw StatisticsError("product initial states need distinguishable particles");
    if (options.final_projector || options.pair_correlation) {
      // Both need the joint state; expand the product onto the full basis.
      return run_full(product_state(*full().basis, initial.factors), t_end, seed, trajectory, options);
    }
    return run_product(initial.factors, t_end, seed, trajectory, options);
  }
  return run_full(initial.full, t_end, seed, trajectory, options);
}

TrajectoryRecord DiffusiveSimulator::run_full(const StateVector& initial, double t_end,
                                              std::uint64_t seed, std::uint64_t trajectory,
                                              const RecordOptions& options) const {
  const Full& f = full();
  if (static_cast<std::size_t>(initial.size()) != f.basis->dimension())
    throw DimensionError("initial state length does not match basis dimension");
  const auto times = readout_times(t_end, options.readout_points);
  const double dt = aligned_dt(t_end, options.readout_points);
  const auto steps_per_interval =
      static_cast<std::uint64_t>(std::llround((times[1] - times[0]) / dt));
  const double sqrt_dt = std::sqrt(dt);

  auto rec = f.table.make_record(times, options);
  rec.seed = seed;
  rec.trajectory = trajectory;

  Channels chan;
  for (std::size_t c = 0; c < f.observables.size(); ++c) {
    const double k = is_indistinguishable(spec_.statistics) ? params_.kappa_cm : params_.kappa_rel[c];
    chan.add(f.observables[c].data(), f.observables[c].size(), k);
  }
  StateVector psi = initial, out(initial.size());
  normalize(psi);
  chan.refresh_means(psi);
  f.table.record(psi.cwiseAbs2(), 0, rec, options);
  if (options.pair_correlation) rec.pair_correlation[0] = pair_correlation(*f.basis, psi);

  const CounterRng rng(seed, trajectory);
  double dW[kMaxChannels];
  std::uint64_t step = 0;
  for (std::size_t row = 1; row < times.size(); ++row) {
    for (std::uint64_t s = 0; s < steps_per_interval; ++s, ++step) {
      for (std::size_t c = 0; c < chan.obs.size(); ++c) {
        dW[c] = sqrt_dt * rng.normal(step, static_cast<std::uint32_t>(c));
        rec.noise_checksum = fnv1a_mix(rec.noise_checksum, dW[c]);
      }
      em_step(f.hamiltonian, chan, psi, out, dW, dt);
    }
    f.table.record(psi.cwiseAbs2(), row, rec, options);
    if (options.pair_correlation) rec.pair_correlation[row] = pair_correlation(*f.basis, psi);
  }
  if (options.final_projector) rec.final_projector = psi * psi.adjoint();
  return rec;
}

TrajectoryRecord DiffusiveSimulator::run_product(const std::vector<ComplexVector>& factors,
                                                 double t_end, std::uint64_t seed,
                                                 std::uint64_t trajectory,
                                                 const RecordOptions& options) const {
  const Single& s1 = *single_;
  if (static_cast<int>(factors.size()) != spec_.particles)
    throw DimensionError("need one factor per particle");
  for (const auto& f : factors)
    if (f.size() != spec_.sites) throw DimensionError("factor length must equal the site count");

  const auto times = readout_times(t_end, options.readout_points);
  const double dt = aligned_dt(t_end, options.readout_points);
  const auto steps_per_interval =
      static_cast<std::uint64_t>(std::llround((times[1] - times[0]) / dt));
  const double sqrt_dt = std::sqrt(dt);
  const int n = spec_.particles;

  auto rec = s1.table.make_record(times, options);
  rec.seed = seed;
  rec.trajectory = trajectory;

  std::vector<ComplexVector> psi(factors.begin(), factors.end());
  std::vector<Channels> chan(n);
  for (int i = 0; i < n; ++i) {
    normalize(psi[i]);
    chan[i].add(s1.coordinate.data(), s1.coordinate.size(), params_.kappa_rel[i]);
    chan[i].refresh_means(psi[i]);
  }
  s1.table.record_product(psi, 0, rec, options);

  const CounterRng rng(seed, trajectory);
  StateVector out(spec_.sites);
  std::uint64_t step = 0;
  for (std::size_t row = 1; row < times.size(); ++row) {
    for (std::uint64_t s = 0; s < steps_per_interval; ++s, ++step) {
      for (int i = 0; i < n; ++i) {
        const double dW = sqrt_dt * rng.normal(step, static_cast<std::uint32_t>(i));
        rec.noise_checksum = fnv1a_mix(rec.noise_checksum, dW);
        em_step(s1.hamiltonian, chan[i], psi[i], out, &dW, dt);
      }
    }
    s1.table.record_product(psi, row, rec, options);
  }
  return rec;
}

TrajectoryRecord run_diffusive_trajectory(const SystemSpec& spec, const DiffusiveParams& params,
                                          const InitialState& initial, double t_end,
                                          std::uint64_t seed, const RecordOptions& options) {
  return DiffusiveSimulator(spec, params).run(initial, t_end, seed, 0, options);
}

}  // namespace qmon
