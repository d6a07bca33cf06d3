#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "qmon/basis.hpp"
#include "qmon/core.hpp"
#include "qmon/operators.hpp"
#include "qmon/system.hpp"

namespace qmon {

enum class PsfKind { Gaussian, Tabulated };

/// Amplitude point-spread function f, symmetric and normalized so that
/// the integral of f^2 is one.
class PointSpreadFunction {
 public:
  /// f(X) = exp(-X^2 / (2 sigma^2)) / (sigma^2 pi)^(1/4)
  static PointSpreadFunction gaussian(double sigma);

  /// Uniformly sampled symmetric profile; linear interpolation between
  /// samples, zero outside. Throws ValidationError if the grid is not
  /// uniform, the profile not symmetric, or not normalized within 1e-6.
  static PointSpreadFunction tabulated(std::vector<double> grid, std::vector<double> values);

  /// Two whitespace-separated columns "X f(X)"; '#' starts a comment.
  static PointSpreadFunction parse(std::istream& in);
  static PointSpreadFunction load(const std::filesystem::path& path);

  PsfKind kind() const { return kind_; }

  /// Gaussian: sigma. Tabulated: rms width of f^2.
  double width() const { return width_; }

  /// Half-extent outside which f vanishes (infinite for the Gaussian).
  double support() const;

  double operator()(double x) const;

  /// Integral of f(X) f(X - shift) dX. Analytic for the Gaussian,
  /// trapezoidal on the sample grid otherwise.
  double overlap(double shift) const;

  const std::vector<double>& samples_x() const { return grid_; }
  const std::vector<double>& samples_f() const { return values_; }

 private:
  PointSpreadFunction() = default;

  PsfKind kind_ = PsfKind::Gaussian;
  double width_ = 1.0;
  std::vector<double> grid_;
  std::vector<double> values_;
};

/// Uniform grid of screen positions X.
struct OutcomeGrid {
  double start = 0.0;
  double spacing = 1.0;
  std::size_t points = 0;

  double at(std::size_t i) const { return start + spacing * static_cast<double>(i); }
  double end() const { return at(points - 1); }
};

/// Probability density of the next detection position, tabulated on the
/// outcome grid; `values` integrate to one (trapezoid rule).
struct OutcomeDensity {
  std::vector<double> values;
  double total_rate = 0.0;  // trapezoid estimate of the integral of <M+ M>
};

/// Everything derived from the point-spread function for one lattice.
///
/// The outcome grid spans (lattice center) +/- (M d + 6 w) with spacing
/// min(d, w) / 8, where w is the psf width. The overlap matrix
/// F[m][l] = integral f(X - m d) f(X - l d) dX is analytic for Gaussian psfs.
class MeasurementModel {
 public:
  /// `particle_rates` overrides gamma per distinguishable particle; empty
  /// means every particle uses spec.gamma.
  MeasurementModel(const SystemSpec& spec, PointSpreadFunction psf,
                   std::vector<double> particle_rates = {});

  const SystemSpec& system() const { return spec_; }
  const PointSpreadFunction& psf() const { return psf_; }
  double gamma() const { return spec_.gamma; }
  double particle_rate(int particle) const;
  const OutcomeGrid& grid() const { return grid_; }
  const Eigen::MatrixXd& overlap() const { return overlap_; }

  /// Empty when the psf is too narrow for the quadratic overlap expansion.
  std::optional<double> sigma_eff() const { return sigma_eff_; }

  double site_position(int site) const { return spec_.coordinate(site) * spec_.lattice_constant; }

  /// f(X_g - x_m) for every grid point g (rows) and site m (columns).
  const Eigen::MatrixXd& psf_on_grid() const { return psf_table_; }

 private:
  SystemSpec spec_;
  PointSpreadFunction psf_;
  std::vector<double> particle_rates_;
  OutcomeGrid grid_;
  Eigen::MatrixXd overlap_;
  Eigen::MatrixXd psf_table_;
  std::optional<double> sigma_eff_;
};

/// Number of independent detection channels: one for indistinguishable
/// particles, one per particle otherwise.
int channel_count(const FockBasis& basis);

/// sqrt(gamma) sum_m f(X - x_m) n_m, diagonal in the Fock basis.
OperatorMatrix measurement_operator(const MeasurementModel& model, const FockBasis& basis, double x);

/// sqrt(gamma_i) sum_x f(X - x) |x><x|_i for distinguishable particle i.
OperatorMatrix measurement_operator(const MeasurementModel& model, const FockBasis& basis,
                                    int particle, double x);

/// Integral over X of M+(X) M(X), summed over channels, from the exact
/// overlap matrix: gamma sum_{m,l} F[m][l] n_m n_l for indistinguishable
/// particles and sum_i gamma_i * identity for distinguishable ones.
OperatorMatrix integrated_mdagm(const MeasurementModel& model, const FockBasis& basis);

/// Per-channel total rates <integral M_c+ M_c dX> for a normalized state.
std::vector<double> channel_rates(const MeasurementModel& model, const FockBasis& basis,
                                  const StateVector& state);

/// Density of detection positions for `channel` (0 for indistinguishable
/// particles). Throws DegenerateError when the total rate vanishes.
OutcomeDensity outcome_distribution(const MeasurementModel& model, const FockBasis& basis,
                                    const StateVector& state, int channel = 0);

/// Inverse-CDF draw: the cumulative trapezoid integral is interpolated
/// linearly between grid points. `u` in (0, 1).
double sample_outcome(const OutcomeGrid& grid, const OutcomeDensity& density, double u);

/// Length sigma_eff such that F(s) ~ 1 - s^2 / (4 sigma_eff^2) for lattice
/// separations s = k d with s <= sigma_eff.
///
/// A quartic correction term is fitted alongside the quadratic one so the
/// curvature is not biased by the O(s^4) tail inside the window; the window
/// is iterated to a fixed point. Throws FitError when the window holds no
/// separation (psf narrower than d) or the relative rms residual exceeds 10%.
double effective_resolution(const PointSpreadFunction& psf, double lattice_constant);

}  // namespace qmon
