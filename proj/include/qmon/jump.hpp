#pragma once

#include <memory>
#include <utility>

#include "qmon/basis.hpp"
#include "qmon/core.hpp"
#include "qmon/measurement.hpp"
#include "qmon/observables.hpp"
#include "qmon/operators.hpp"
#include "qmon/rng.hpp"

namespace qmon {

/// H_nc = H - (i/2) integral M+ M dX. The decay part is diagonal in the
/// Fock basis and kept as a real vector.
struct NoCountGenerator {
  OperatorMatrix hamiltonian;
  RealVector decay;

  std::size_t dimension() const { return hamiltonian.dimension(); }
  /// Dense H_nc, for tests.
  DenseMatrix to_dense() const;
};

NoCountGenerator nocount_generator(const OperatorMatrix& hamiltonian, const OperatorMatrix& mdagm);

/// One RK4 step of d psi/dt = -i H_nc psi. The result is not normalized.
/// Throws StepError if the squared norm falls below 1e-12.
StateVector evolve_nocount(const StateVector& state, const NoCountGenerator& gen, double dt);

struct WaitingTime {
  bool jumped = false;
  double time = 0.0;           // elapsed time (jump time or t_max)
  double pre_jump_norm = 1.0;  // norm of the unnormalized no-count state
  StateVector state;           // normalized state at `time`
};

/// Evolve under H_nc until the accumulated squared norm drops below a
/// uniform draw or t_max elapses. Steps are at most dt_max; the crossing is
/// located by Newton iteration on the log-norm inside the final step.
WaitingTime sample_jump_time(const StateVector& state, const NoCountGenerator& gen,
                             CounterRng& rng, double t_max, double dt_max);

struct JumpOptions {
  double dt_max = 0.0;  // 0 selects default_dt()
  RecordOptions record;
};

/// Photodetection unraveling of one system.
class JumpSimulator {
 public:
  /// `basis` may be shared across simulators; it is enumerated when null.
  JumpSimulator(const SystemSpec& spec, MeasurementModel model,
                std::shared_ptr<const FockBasis> basis = nullptr);

  const SystemSpec& system() const { return spec_; }
  const FockBasis& basis() const { return *basis_; }
  std::shared_ptr<const FockBasis> shared_basis() const { return basis_; }
  const MeasurementModel& model() const { return model_; }
  const NoCountGenerator& generator() const { return generator_; }

  /// 0.01 min(1/J, 1/(gamma N^2)), ignoring vanishing scales.
  double default_dt() const;

  /// Pick a channel in proportion to its rate, then a detection position
  /// from its outcome density, and apply M_c(X). Returns the normalized
  /// post-jump state; throws DegenerateError when no channel can fire.
  std::pair<StateVector, JumpEvent> apply_jump(const StateVector& state, double time,
                                               CounterRng& rng) const;

  TrajectoryRecord run(const StateVector& initial, double t_end, std::uint64_t seed,
                       std::uint64_t trajectory, const JumpOptions& options = {}) const;

 private:
  SystemSpec spec_;
  std::shared_ptr<const FockBasis> basis_;
  MeasurementModel model_;
  NoCountGenerator generator_;
  ObservableTable table_;
};

/// Convenience wrapper around JumpSimulator for a single realization.
TrajectoryRecord run_jump_trajectory(const SystemSpec& spec, const MeasurementModel& model,
                                     const StateVector& initial, double t_end,
                                     std::uint64_t seed, const JumpOptions& options = {});

}  // namespace qmon
