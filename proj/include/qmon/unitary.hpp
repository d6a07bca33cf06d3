#pragma once

#include <memory>

#include "qmon/basis.hpp"
#include "qmon/diffusive.hpp"
#include "qmon/observables.hpp"
#include "qmon/operators.hpp"

namespace qmon {

/// 0.0025 / J (1.0 when J = 0).
double default_unitary_dt(const SystemSpec& spec);

/// Measurement-free evolution with classical RK4 on a fixed step aligned to
/// the readout grid. Distinguishable product states are propagated factor by
/// factor, which is exact because the particles do not interact.
class UnitarySimulator {
 public:
  UnitarySimulator(const SystemSpec& spec, std::shared_ptr<const FockBasis> basis = nullptr);

  TrajectoryRecord run(const InitialState& initial, double t_end, const RecordOptions& options = {},
                       double dt = 0.0) const;

  /// State after time t (no readouts).
  StateVector evolve(const StateVector& initial, double t, double dt = 0.0) const;

 private:
  SystemSpec spec_;
  std::shared_ptr<const FockBasis> basis_;
  std::shared_ptr<const OperatorMatrix> hamiltonian_;
  std::shared_ptr<const OperatorMatrix> single_hamiltonian_;
};

}  // namespace qmon
