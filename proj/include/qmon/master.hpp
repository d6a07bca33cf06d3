#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "qmon/basis.hpp"
#include "qmon/core.hpp"
#include "qmon/measurement.hpp"
#include "qmon/operators.hpp"

namespace qmon {

/// Unconditional dissipators. Every variant is diagonal in the Fock basis,
/// so the dissipator acts elementwise as -R_ab rho_ab:
///   IndistCM      R = (N^2 Gamma / 4) (X_a - X_b)^2
///   DistFull      R = sum_i (Gamma_i / 4) (x_i^a - x_i^b)^2
///   SiteResolved  R = (gamma / 2) sum_m (n_m^a - n_m^b)^2, per particle for
///                 distinguishable signals: sum_i gamma_i [x_i^a != x_i^b]
///   ExactOverlap  R = (gamma / 2) sum_{m,l} F_ml dn_m dn_l, per particle
///                 for distinguishable signals: sum_i gamma_i (1 - F(x_i^a, x_i^b))
/// with Gamma = gamma d^2 / sigma^2 and X the centre-of-mass coordinate.
enum class MasterVariant { IndistCM, DistFull, SiteResolved, ExactOverlap };

std::string_view to_string(MasterVariant v);
MasterVariant master_variant_from_string(std::string_view name);

struct MasterSpec {
  MasterVariant variant = MasterVariant::IndistCM;
  SystemSpec system;
  /// ExactOverlap only; a Gaussian of width system.sigma when empty.
  std::optional<PointSpreadFunction> psf;
  /// Per-particle gamma for distinguishable signals; empty means system.gamma.
  std::vector<double> particle_rates;

  /// Throws ValidationError/StatisticsError for incompatible combinations.
  void validate() const;
};

inline constexpr std::size_t kMasterDimensionCap = 1024;

class MasterEquation {
 public:
  /// Throws CapacityError above kMasterDimensionCap.
  explicit MasterEquation(const MasterSpec& spec, std::shared_ptr<const FockBasis> basis = nullptr);

  const MasterSpec& spec() const { return spec_; }
  const FockBasis& basis() const { return *basis_; }
  std::shared_ptr<const FockBasis> shared_basis() const { return basis_; }
  const OperatorMatrix& hamiltonian() const { return hamiltonian_; }

  /// R_ab, symmetric with zero diagonal.
  const Eigen::MatrixXd& dephasing_rates() const { return rates_; }
  double max_rate() const { return rates_.maxCoeff(); }

  /// 0.005 min(1/J, 1/max_rate), ignoring vanishing scales.
  double default_dt() const;

  /// -i[H, rho] - R o rho.
  DensityMatrix rhs(const DensityMatrix& rho) const;
  /// The dissipator alone.
  DensityMatrix dissipator(const DensityMatrix& rho) const;

 private:
  MasterSpec spec_;
  std::shared_ptr<const FockBasis> basis_;
  OperatorMatrix hamiltonian_;
  Eigen::MatrixXd rates_;
};

DensityMatrix lindblad_rhs(const MasterEquation& eq, const DensityMatrix& rho);

struct MasterSeries {
  std::vector<double> times;
  std::vector<DensityMatrix> states;
  double max_trace_error = 0.0;
  double min_eigenvalue = 0.0;  // over the checked readouts
  std::vector<std::string> warnings;
};

/// RK4 over [0, t_end] with `readout_points` uniform readouts (at least 2).
/// dt <= 0 selects default_dt(); the step is shrunk to divide each readout
/// interval. rho is Hermitian-symmetrized after every step. A warning is
/// recorded when an eigenvalue below -1e-6 is found at a readout; readouts
/// are checked when the dimension is at most 256, the final state always.
MasterSeries integrate_master(const MasterEquation& eq, const DensityMatrix& rho0, double t_end,
                              double dt = 0.0, std::size_t readout_points = 2);

/// 2 J^2 t^2.
double analytic_ballistic_variance(double J, double t);

struct FreeWalkDensity {
  double value = 0.0;
  bool boundary_warning = false;
};

/// J_m(2 J t)^2 for a particle started at the origin of an infinite chain.
/// The warning is set when the wavefront 2 J t comes within 5 sites of
/// `boundary_distance` (sites from the origin to the nearest edge).
FreeWalkDensity analytic_free_walk_density(double J, double t, int m,
                                           std::optional<int> boundary_distance = std::nullopt);

/// D_c = 16 J^2 / Gamma.
double analytic_relative_diffusion(double J, double Gamma);

/// (3 sqrt(2) / (Gamma J^2))^(1/3).
double analytic_collapse_time(double J, double Gamma);

}  // namespace qmon
