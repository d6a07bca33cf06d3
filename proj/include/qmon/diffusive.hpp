#pragma once

#include <memory>
#include <span>
#include <vector>

#include "qmon/basis.hpp"
#include "qmon/core.hpp"
#include "qmon/observables.hpp"
#include "qmon/operators.hpp"

namespace qmon {

/// How gamma is shared when indistinguishable and distinguishable runs are
/// compared. EqualGamma applies the configured gamma as is; EqualTotalRate
/// divides it by N for indistinguishable particles, so the aggregate signal
/// carries the same total rate as N separate ones.
enum class RateConvention { EqualGamma, EqualTotalRate };

std::string_view to_string(RateConvention c);
RateConvention rate_convention_from_string(std::string_view name);

/// Rates of the diffusive (weak, continuous) limit. With Gamma = gamma d^2 /
/// sigma^2 the indistinguishable SSE uses kappa_cm = N^2 Gamma / 2 and the
/// distinguishable one kappa_rel[i] = Gamma_i / 2 per particle:
///   d psi = [-i H - (k/2) dA^2] psi dt + sqrt(k) dA psi dW,  dA = A - <A>.
struct DiffusiveParams {
  double kappa_cm = 0.0;
  std::vector<double> kappa_rel;
  double dt = 0.0;

  /// Rates for `spec` under `convention`; `particle_rates` overrides gamma
  /// per distinguishable particle. dt is set to default_diffusive_dt().
  static DiffusiveParams from_system(const SystemSpec& spec,
                                     RateConvention convention = RateConvention::EqualGamma,
                                     std::vector<double> particle_rates = {});

  /// Throws ValidationError naming the offending field.
  void validate(const SystemSpec& spec) const;
};

/// 0.01 min(1/J, 1/(N^2 Gamma)), ignoring vanishing scales.
double default_diffusive_dt(const SystemSpec& spec);

/// One Euler-Maruyama step of the indistinguishable SSE driven by X_CM:
///   psi' = exp(sqrt(k) dA dW - k dA^2 dt) psi - i H psi dt,  then normalized,
/// where the exponential is the bounded form of 1 - (k/2) dA^2 dt + sqrt(k) dA dW
/// (equal through first order, same Ito limit). Throws StepError if the
/// unnormalized norm deviates from one by more than 0.1.
StateVector sse_step_indist(const StateVector& state, const OperatorMatrix& hamiltonian,
                            const OperatorMatrix& xcm, const DiffusiveParams& params, double dW);

/// One Euler-Maruyama step with independent increments dW[i] per particle.
StateVector sse_step_dist(const StateVector& state, const OperatorMatrix& hamiltonian,
                          std::span<const OperatorMatrix> positions, const DiffusiveParams& params,
                          std::span<const double> dW);

/// Initial condition for a diffusive run: either a full state vector over
/// the basis, or one single-particle factor per distinguishable particle.
struct InitialState {
  StateVector full;
  std::vector<ComplexVector> factors;

  static InitialState vector(StateVector psi) { return {std::move(psi), {}}; }
  static InitialState product(std::vector<ComplexVector> factors) { return {{}, std::move(factors)}; }
  bool is_product() const { return !factors.empty(); }
};

/// Diffusive unraveling of one system.
///
/// Wiener increments come from CounterRng(seed, trajectory): dW_i at step s
/// is sqrt(dt) * normal(s, i), lane 0 for the indistinguishable case. A
/// distinguishable product initial state stays a product state under the
/// per-particle SSE, so it is propagated as N single-particle states; this
/// consumes the same increments as the full product-basis integration.
class DiffusiveSimulator {
 public:
  /// `basis` is needed for full-vector initial states. When null it is
  /// enumerated here if it fits the default capacity; otherwise only product
  /// initial states can be run.
  DiffusiveSimulator(const SystemSpec& spec, DiffusiveParams params,
                     std::shared_ptr<const FockBasis> basis = nullptr);

  const SystemSpec& system() const { return spec_; }
  const DiffusiveParams& params() const { return params_; }

  TrajectoryRecord run(const InitialState& initial, double t_end, std::uint64_t seed,
                       std::uint64_t trajectory, const RecordOptions& options = {}) const;

  /// Time step actually used for [0, t_end] with `points` readouts: the
  /// largest step <= params.dt that divides every readout interval.
  double aligned_dt(double t_end, std::size_t points) const;

 private:
  struct Full;
  struct Single;

  const Full& full() const;
  TrajectoryRecord run_full(const StateVector& initial, double t_end, std::uint64_t seed,
                            std::uint64_t trajectory, const RecordOptions& options) const;
  TrajectoryRecord run_product(const std::vector<ComplexVector>& factors, double t_end,
                               std::uint64_t seed, std::uint64_t trajectory,
                               const RecordOptions& options) const;

  SystemSpec spec_;
  DiffusiveParams params_;
  std::shared_ptr<const Full> full_;
  std::shared_ptr<const Single> single_;
};

/// Convenience wrapper for a single realization.
TrajectoryRecord run_diffusive_trajectory(const SystemSpec& spec, const DiffusiveParams& params,
                                          const InitialState& initial, double t_end,
                                          std::uint64_t seed, const RecordOptions& options = {});

}  // namespace qmon
