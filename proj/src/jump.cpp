#include "qmon/jump.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace qmon {

namespace {

constexpr double kMinSquaredNorm = 1e-12;

void nocount_derivative(const NoCountGenerator& gen, const StateVector& psi, StateVector& hpsi,
                        StateVector& out) {
  gen.hamiltonian.apply(psi, hpsi);
  out = Complex(0.0, -1.0) * hpsi - 0.5 * gen.decay.cwiseProduct(psi);
}

// Normalized no-count evolution with the survival probability tracked as a
// log in a separate accumulator.
class NoCountPropagator {
 public:
  NoCountPropagator(const NoCountGenerator& gen, StateVector state)
      : gen_(gen), psi_(std::move(state)) {}

  const StateVector& state() const { return psi_; }
  double log_norm() const { return log_norm_; }

  // Advance by h. If the log-norm would cross `log_threshold` inside the
  // step, stop exactly at the crossing and return the elapsed fraction.
  std::optional<double> advance(double h, double log_threshold) {
    StateVector trial = evolve_nocount(psi_, gen_, h);
    const double log_end = log_norm_ + std::log(trial.squaredNorm());
    if (log_end > log_threshold) {
      psi_ = trial / std::sqrt(trial.squaredNorm());
      log_norm_ = log_end;
      return std::nullopt;
    }
    const double tau = locate_crossing(h, log_threshold, log_end, trial);
    psi_ = trial / std::sqrt(trial.squaredNorm());
    log_norm_ = log_threshold;
    return tau;
  }

 private:
  // Root of g(tau) = log_norm + log |U(tau) psi|^2 - threshold on (0, h].
  // Newton with g'(tau) = -<decay>; bisection whenever Newton leaves the
  // bracket. `trial` returns the unnormalized state at the root.
  double locate_crossing(double h, double threshold, double g_end_log, StateVector& trial) const {
    double lo = 0.0, hi = h;
    double g_lo = log_norm_ - threshold;
    double g_hi = g_end_log - threshold;
    // Linear interpolation as the first guess.
    double tau = (g_lo - g_hi) > 0.0 ? h * g_lo / (g_lo - g_hi) : h;
    for (int iter = 0; iter < 100; ++iter) {
      trial = evolve_nocount(psi_, gen_, tau);
      const double n2 = trial.squaredNorm();
      const double g = log_norm_ + std::log(n2) - threshold;
      if (std::abs(g) < 1e-13) return tau;
      if (g > 0.0) {
        lo = tau;
        g_lo = g;
      } else {
        hi = tau;
        g_hi = g;
      }
      if (hi - lo < 1e-15 * h) break;
      const double rate = gen_.decay.dot(trial.cwiseAbs2()) / n2;
      double next = rate > 0.0 ? tau + g / rate : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      tau = next;
    }
    tau = hi;
    trial = evolve_nocount(psi_, gen_, tau);
    return tau;
  }

  const NoCountGenerator& gen_;
  StateVector psi_;
  double log_norm_ = 0.0;
};

}  // namespace

DenseMatrix NoCountGenerator::to_dense() const {
  DenseMatrix m = hamiltonian.to_dense();
  m.diagonal() -= Complex(0.0, 0.5) * decay.cast<Complex>();
  return m;
}

NoCountGenerator nocount_generator(const OperatorMatrix& hamiltonian, const OperatorMatrix& mdagm) {
  if (hamiltonian.dimension() != mdagm.dimension())
    throw DimensionError("hamiltonian and measurement operators differ in dimension");
  if (!mdagm.is_diagonal()) throw ValidationError("integrated M+M must be diagonal in the Fock basis");
  return NoCountGenerator{hamiltonian, mdagm.diagonal_entries()};
}

StateVector evolve_nocount(const StateVector& state, const NoCountGenerator& gen, double dt) {
  if (static_cast<std::size_t>(state.size()) != gen.dimension())
    throw DimensionError("state length does not match generator dimension");
  StateVector hpsi(state.size()), k1, k2, k3, k4, tmp;
  nocount_derivative(gen, state, hpsi, k1);
  tmp = state + 0.5 * dt * k1;
  nocount_derivative(gen, tmp, hpsi, k2);
  tmp = state + 0.5 * dt * k2;
  nocount_derivative(gen, tmp, hpsi, k3);
  tmp = state + dt * k3;
  nocount_derivative(gen, tmp, hpsi, k4);
  StateVector out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  if (!(out.squaredNorm() >= kMinSquaredNorm))
    throw StepError("no-count norm fell below 1e-12 in one step; reduce dt");
  return out;
}

WaitingTime sample_jump_time(const StateVector& state, const NoCountGenerator& gen,
                             CounterRng& rng, double t_max, double dt_max) {
  if (!(dt_max > 0.0)) throw ValidationError("dt_max: must be > 0");
  StateVector start = state;
  normalize(start);
  const double log_threshold = std::log(rng.next_uniform());
  NoCountPropagator prop(gen, std::move(start));
  double t = 0.0;
  while (t < t_max) {
    const double h = std::min(dt_max, t_max - t);
    if (auto tau = prop.advance(h, log_threshold)) {
      return WaitingTime{true, t + *tau, std::exp(0.5 * prop.log_norm()), prop.state()};
    }
    t = (h == t_max - t) ? t_max : t + h;
  }
  return WaitingTime{false, t_max, std::exp(0.5 * prop.log_norm()), prop.state()};
}

JumpSimulator::JumpSimulator(const SystemSpec& spec, MeasurementModel model,
                             std::shared_ptr<const FockBasis> basis)
    : spec_(spec),
      basis_(basis ? std::move(basis) : std::make_shared<const FockBasis>(enumerate_basis(spec))),
      model_(std::move(model)),
      generator_(nocount_generator(build_hamiltonian(spec_, *basis_), integrated_mdagm(model_, *basis_))),
      table_(spec_, basis_) {}

double JumpSimulator::default_dt() const {
  double scale = std::numeric_limits<double>::infinity();
  if (spec_.hopping != 0.0) scale = std::min(scale, 1.0 / std::abs(spec_.hopping));
  const double rate = spec_.gamma * spec_.particles * spec_.particles;
  if (rate > 0.0) scale = std::min(scale, 1.0 / rate);
  if (!std::isfinite(scale)) scale = 1.0;
  return 0.01 * scale;
}

std::pair<StateVector, JumpEvent> JumpSimulator::apply_jump(const StateVector& state, double time,
                                                            CounterRng& rng) const {
  const auto rates = channel_rates(model_, *basis_, state);
  double total = 0.0;
  for (double r : rates) total += r;
  if (!(total > 0.0)) throw DegenerateError("no detection channel has a positive rate");

  int channel = static_cast<int>(rates.size()) - 1;
  const double pick = rng.next_uniform() * total;
  double acc = 0.0;
  for (std::size_t c = 0; c < rates.size(); ++c) {
    acc += rates[c];
    if (pick < acc) {
      channel = static_cast<int>(c);
      break;
    }
  }

  const auto density = outcome_distribution(model_, *basis_, state, channel);
  const double x = sample_outcome(model_.grid(), density, rng.next_uniform());
  const auto op = spec_.statistics == Statistics::Distinguishable
                      ? measurement_operator(model_, *basis_, channel, x)
                      : measurement_operator(model_, *basis_, x);
  StateVector next = op * state;
  normalize(next);
  return {std::move(next), JumpEvent{time, x, 1.0, channel}};
}

TrajectoryRecord JumpSimulator::run(const StateVector& initial, double t_end, std::uint64_t seed,
                                    std::uint64_t trajectory, const JumpOptions& options) const {
  if (static_cast<std::size_t>(initial.size()) != basis_->dimension())
    throw DimensionError("initial state length does not match basis dimension");
  const double dt = options.dt_max > 0.0 ? options.dt_max : default_dt();
  const auto times = readout_times(t_end, options.record.readout_points);
  auto rec = table_.make_record(times, options.record);
  rec.seed = seed;
  rec.trajectory = trajectory;

  CounterRng rng(seed, trajectory);
  StateVector psi = initial;
  normalize(psi);
  table_.record(psi.cwiseAbs2(), 0, rec, options.record);

  auto prop = std::make_unique<NoCountPropagator>(generator_, psi);
  double log_threshold = std::log(rng.next_uniform());
  double t = 0.0;
  for (std::size_t row = 1; row < times.size(); ++row) {
    const double target = times[row];
    while (t < target) {
      const double h = std::min(dt, target - t);
      if (auto tau = prop->advance(h, log_threshold)) {
        t += *tau;
        const double pre_norm = std::exp(0.5 * prop->log_norm());
        auto [next, event] = apply_jump(prop->state(), t, rng);
        event.pre_jump_norm = pre_norm;
        rec.events.push_back(event);
        prop = std::make_unique<NoCountPropagator>(generator_, std::move(next));
        log_threshold = std::log(rng.next_uniform());
        continue;
      }
      t = (h == target - t) ? target : t + h;
    }
    table_.record(prop->state().cwiseAbs2(), row, rec, options.record);
  }
  if (options.record.final_projector) {
    const auto& s = prop->state();
    rec.final_projector = s * s.adjoint();
  }
  for (const auto& e : rec.events) rec.noise_checksum = fnv1a_mix(fnv1a_mix(rec.noise_checksum, e.time), e.outcome);
  return rec;
}

TrajectoryRecord run_jump_trajectory(const SystemSpec& spec, const MeasurementModel& model,
                                     const StateVector& initial, double t_end,
                                     std::uint64_t seed, const JumpOptions& options) {
  return JumpSimulator(spec, model).run(initial, t_end, seed, 0, options);
}

}  // namespace qmon
