#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "qmon/core.hpp"
#include "qmon/observables.hpp"

namespace qmon {

/// Produces realization `index` of an ensemble keyed by `seed`.
using TrajectoryTask = std::function<TrajectoryRecord(std::uint64_t seed, std::uint64_t index)>;

struct FitWindow {
  double start = 0.0;
  double end = 0.0;
};

struct EnsembleOptions {
  /// 0: QMON_WORKERS if set, else the hardware concurrency.
  std::size_t workers = 0;
  /// Trajectories in flight per reduction batch.
  std::size_t batch = 64;
  bool pair_correlation = false;
  bool density_matrix = false;  // average TrajectoryRecord::final_projector
  /// Per-trajectory sigma_r2 slopes over this window (N = 2 only).
  std::optional<FitWindow> slope_window;
};

struct SeriesStats {
  std::vector<double> mean;
  std::vector<double> stderr_;

  std::size_t size() const { return mean.size(); }
};

struct ScalarStats {
  double mean = 0.0;
  double stderr_ = 0.0;
  double stddev = 0.0;
};

/// Mean and standard error (sample standard deviation / sqrt(R)) of every
/// recorded observable.
struct EnsembleResult {
  std::size_t realizations = 0;
  std::uint64_t base_seed = 0;
  Statistics statistics = Statistics::Boson;
  int sites = 0;
  int particles = 0;
  std::vector<double> times;
  Eigen::MatrixXd density_mean;
  Eigen::MatrixXd density_stderr;
  SeriesStats xcm;
  SeriesStats xcm_variance;
  SeriesStats sigma_r2;
  std::vector<Eigen::MatrixXd> pair_mean;
  std::vector<Eigen::MatrixXd> pair_stderr;
  std::optional<DensityMatrix> rho_mean;
  Eigen::MatrixXd rho_stderr_real;
  Eigen::MatrixXd rho_stderr_imag;
  std::optional<ScalarStats> slope;  // of sigma_r2 over EnsembleOptions::slope_window
  ScalarStats jump_count;
};

/// Runs R realizations, trajectory i as task(base_seed, i), and folds them in
/// index order so aggregates are bit-identical for any worker count.
/// Failures are rethrown as TrajectoryError carrying the index.
EnsembleResult run_ensemble(const TrajectoryTask& task, std::size_t realizations,
                            std::uint64_t base_seed, const EnsembleOptions& options = {});

/// Effective worker count for a request of `requested` (0 = automatic).
std::size_t resolve_workers(std::size_t requested);

/// sigma_r2 series of one record. Throws StatisticsError unless N = 2.
std::vector<double> relative_distance_variance(const TrajectoryRecord& record);
SeriesStats relative_distance_variance(const EnsembleResult& result);

struct DiffusionFit {
  double diffusion = 0.0;  // slope / 2
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double slope_stderr = 0.0;  // ordinary least squares
  std::size_t points = 0;
};

/// Least-squares line through (t, series) for t in [window.start,
/// window.end]. Throws FitError for fewer than 3 points or R^2 < 0.9.
DiffusionFit fit_diffusion_constant(std::span<const double> times, std::span<const double> series,
                                    FitWindow window);

/// Plain least-squares slope over the window (no quality gate).
double window_slope(std::span<const double> times, std::span<const double> series, FitWindow window);

}  // namespace qmon
