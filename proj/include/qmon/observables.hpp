#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "qmon/basis.hpp"
#include "qmon/core.hpp"
#include "qmon/system.hpp"

namespace qmon {

/// One photodetection: time, screen position and the norm of the no-count
/// state just before the jump. `channel` is the particle index for
/// distinguishable signals and 0 otherwise.
struct JumpEvent {
  double time = 0.0;
  double outcome = 0.0;
  double pre_jump_norm = 0.0;
  int channel = 0;
};

struct RecordOptions {
  std::size_t readout_points = 200;
  bool pair_correlation = false;
  /// Store |psi><psi| at the last readout (small systems only).
  bool final_projector = false;
};

/// Observables of one realization on a uniform readout grid over [0, t_end].
///
/// sigma_r2 is the mean squared relative distance. For distinguishable
/// particles it is <(x_1 - x_2)^2>; for indistinguishable ones it is
/// sum_{m,l} (m - l)^2 <n_m n_l - delta_ml n_m> / (N (N - 1)), which equals the
/// first-quantized <(x_1 - x_2)^2> of the (anti)symmetrized wavefunction.
/// It is filled only when N = 2.
struct TrajectoryRecord {
  Statistics statistics = Statistics::Boson;
  int sites = 0;
  int particles = 0;
  std::vector<double> times;
  Eigen::MatrixXd density;  // readouts x sites, <n_m>
  std::vector<double> xcm;
  std::vector<double> xcm_variance;
  std::vector<double> sigma_r2;
  std::vector<Eigen::MatrixXd> pair_correlation;  // <n_m n_l> per readout, optional
  std::vector<JumpEvent> events;
  std::uint64_t seed = 0;
  std::uint64_t trajectory = 0;
  std::uint64_t noise_checksum = 0;  // FNV-1a over the realized Wiener increments
  std::optional<DensityMatrix> final_projector;
};

/// Uniform readout times t_k = k t_end / (points - 1).
std::vector<double> readout_times(double t_end, std::size_t points);

/// Diagonal observables of a FockBasis, precomputed once and shared by all
/// trajectories. Every recorded quantity depends only on the basis-state
/// probabilities, so the same code serves pure states and density matrices.
class ObservableTable {
 public:
  ObservableTable(const SystemSpec& spec, std::shared_ptr<const FockBasis> basis);

  const FockBasis& basis() const { return *basis_; }

  /// Start a record sized for `times`.
  TrajectoryRecord make_record(std::span<const double> times, const RecordOptions& options) const;

  /// Fill readout `row` from basis-state probabilities.
  void record(const RealVector& probabilities, std::size_t row, TrajectoryRecord& rec,
              const RecordOptions& options) const;

  /// Fill readout `row` from a product state of distinguishable particles,
  /// one single-site-basis factor per particle.
  void record_product(std::span<const ComplexVector> factors, std::size_t row,
                      TrajectoryRecord& rec, const RecordOptions& options) const;

  const RealVector& xcm_values() const { return xcm_; }
  const RealVector& relative_sq_values() const { return rel_sq_; }

 private:
  SystemSpec spec_;
  std::shared_ptr<const FockBasis> basis_;
  RealVector xcm_;
  RealVector rel_sq_;
};

/// <n_m n_l> for a pure state.
Eigen::MatrixXd pair_correlation(const FockBasis& basis, const StateVector& state);

/// FNV-1a accumulation of the bit pattern of a double.
std::uint64_t fnv1a_mix(std::uint64_t hash, double value);
inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;

}  // namespace qmon
