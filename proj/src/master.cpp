#include "qmon/master.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

#include "qmon/format.hpp"

namespace qmon {

namespace {

Eigen::MatrixXd build_rates(const MasterSpec& spec, const FockBasis& basis) {
  const auto& sys = spec.system;
  const auto dim = static_cast<Eigen::Index>(basis.dimension());
  const int sites = basis.sites();
  const int n = basis.particles();
  const bool dist = basis.statistics() == Statistics::Distinguishable;
  const double geometry = sys.lattice_constant * sys.lattice_constant / (sys.sigma * sys.sigma);
  auto rate_of = [&](int i) { return spec.particle_rates.empty() ? sys.gamma : spec.particle_rates[i]; };

  Eigen::MatrixXd overlap;
  if (spec.variant == MasterVariant::ExactOverlap) {
    const auto psf = spec.psf ? *spec.psf : PointSpreadFunction::gaussian(sys.sigma);
    overlap.resize(sites, sites);
    for (int m = 0; m < sites; ++m)
      for (int l = 0; l < sites; ++l) overlap(m, l) = psf.overlap((m - l) * sys.lattice_constant);
  }

  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(dim, dim);
  std::vector<double> dn(sites);
  for (Eigen::Index a = 0; a < dim; ++a) {
    const auto na = basis.occupations(a);
    for (Eigen::Index b = a + 1; b < dim; ++b) {
      const auto nb = basis.occupations(b);
      double value = 0.0;
      switch (spec.variant) {
        case MasterVariant::IndistCM: {
          double dx = 0.0;
          for (int m = 0; m < sites; ++m) dx += sys.coordinate(m) * (na[m] - nb[m]);
          dx /= n;
          value = n * n * sys.gamma * geometry / 4.0 * dx * dx;
          break;
        }
        case MasterVariant::DistFull:
          for (int i = 0; i < n; ++i) {
            const double dx = basis.position(a, i) - basis.position(b, i);
            value += rate_of(i) * geometry / 4.0 * dx * dx;
          }
          break;
        case MasterVariant::SiteResolved:
          if (dist) {
            for (int i = 0; i < n; ++i)
              if (basis.position(a, i) != basis.position(b, i)) value += rate_of(i);
          } else {
            for (int m = 0; m < sites; ++m) value += 0.5 * sys.gamma * (na[m] - nb[m]) * (na[m] - nb[m]);
          }
          break;
        case MasterVariant::ExactOverlap:
          if (dist) {
            for (int i = 0; i < n; ++i)
              value += rate_of(i) * (1.0 - overlap(basis.position(a, i), basis.position(b, i)));
          } else {
            for (int m = 0; m < sites; ++m) dn[m] = na[m] - nb[m];
            double acc = 0.0;
            for (int m = 0; m < sites; ++m) {
              if (dn[m] == 0.0) continue;
              for (int l = 0; l < sites; ++l) acc += overlap(m, l) * dn[m] * dn[l];
            }
            value = 0.5 * sys.gamma * acc;
          }
          break;
      }
      r(a, b) = value;
      r(b, a) = value;
    }
  }
  return r;
}

void hermitize(DensityMatrix& rho) {
  rho = 0.5 * (rho + rho.adjoint()).eval();
}

}  // namespace

std::string_view to_string(MasterVariant v) {
  switch (v) {
    case MasterVariant::IndistCM: return "IndistCM";
    case MasterVariant::DistFull: return "DistFull";
    case MasterVariant::SiteResolved: return "SiteResolved";
    case MasterVariant::ExactOverlap: return "ExactOverlap";
  }
  return "?";
}

MasterVariant master_variant_from_string(std::string_view name) {
  for (auto v : {MasterVariant::IndistCM, MasterVariant::DistFull, MasterVariant::SiteResolved,
                 MasterVariant::ExactOverlap})
    if (iequals(to_string(v), name)) return v;
  throw ValidationError("variant: unknown master variant '" + std::string(name) + "'");
}

void MasterSpec::validate() const {
  system.validate();
  const bool dist = system.statistics == Statistics::Distinguishable;
  if (variant == MasterVariant::DistFull && !dist && system.particles > 1)
    throw StatisticsError("variant: DistFull requires distinguishable statistics");
  if (variant == MasterVariant::IndistCM && dist && system.particles > 1)
    throw StatisticsError("variant: IndistCM requires boson or fermion statistics");
  if (!particle_rates.empty()) {
    if (!dist) throw StatisticsError("particle_rates: only defined for distinguishable particles");
    if (static_cast<int>(particle_rates.size()) != system.particles)
      throw ValidationError("particle_rates: need one rate per particle");
    if (variant == MasterVariant::IndistCM)
      throw ValidationError("particle_rates: not used by IndistCM");
    for (double g : particle_rates)
      if (!(g >= 0.0)) throw ValidationError("particle_rates: must be >= 0");
  }
  if (psf && variant != MasterVariant::ExactOverlap)
    throw ValidationError("psf: only used by the ExactOverlap variant");
}

MasterEquation::MasterEquation(const MasterSpec& spec, std::shared_ptr<const FockBasis> basis)
    : spec_(spec),
      basis_([&] {
        spec.validate();
        const auto dim = basis_dimension(spec.system.statistics, spec.system.sites, spec.system.particles);
        if (dim > kMasterDimensionCap)
          throw CapacityError("master equation dimension " + std::to_string(dim) +
                              " exceeds the cap of " + std::to_string(kMasterDimensionCap));
        return basis ? std::move(basis) : std::make_shared<const FockBasis>(enumerate_basis(spec.system));
      }()),
      hamiltonian_(build_hamiltonian(spec_.system, *basis_)),
      rates_(build_rates(spec_, *basis_)) {}

double MasterEquation::default_dt() const {
  double scale = std::numeric_limits<double>::infinity();
  if (spec_.system.hopping != 0.0) scale = std::min(scale, 1.0 / std::abs(spec_.system.hopping));
  const double rate = max_rate();
  if (rate > 0.0) scale = std::min(scale, 1.0 / rate);
  if (!std::isfinite(scale)) scale = 1.0;
  return 0.005 * scale;
}

DensityMatrix MasterEquation::dissipator(const DensityMatrix& rho) const {
  return -(rates_.cast<Complex>().cwiseProduct(rho));
}

DensityMatrix MasterEquation::rhs(const DensityMatrix& rho) const {
  if (static_cast<std::size_t>(rho.rows()) != basis_->dimension() || rho.rows() != rho.cols())
    throw DimensionError("density matrix shape does not match the basis");
  const SparseMatrix& h = hamiltonian_.sparse_entries();
  DensityMatrix hr = h * rho;
  DensityMatrix rh = rho * h;
  DensityMatrix out = Complex(0.0, -1.0) * (hr - rh);
  out -= rates_.cast<Complex>().cwiseProduct(rho);
  return out;
}

DensityMatrix lindblad_rhs(const MasterEquation& eq, const DensityMatrix& rho) { return eq.rhs(rho); }

MasterSeries integrate_master(const MasterEquation& eq, const DensityMatrix& rho0, double t_end,
                              double dt, std::size_t readout_points) {
  if (static_cast<std::size_t>(rho0.rows()) != eq.basis().dimension() || rho0.rows() != rho0.cols())
    throw DimensionError("rho0 shape does not match the basis");
  if (readout_points < 2) throw ValidationError("readout_points: need at least 2");
  if (!(t_end >= 0.0)) throw ValidationError("t_end: must be >= 0");
  const double dt_max = dt > 0.0 ? dt : eq.default_dt();

  MasterSeries out;
  const double interval = t_end / static_cast<double>(readout_points - 1);
  const auto steps = static_cast<std::uint64_t>(
      std::max(1.0, std::ceil(interval / dt_max * (1.0 - 1e-12))));
  const double h = interval / static_cast<double>(steps);
  const bool check_each = eq.basis().dimension() <= 256;

  DensityMatrix rho = rho0;
  hermitize(rho);
  const Complex trace0 = rho.trace();
  out.min_eigenvalue = std::numeric_limits<double>::infinity();
  auto readout = [&](double t, bool last) {
    out.times.push_back(t);
    out.states.push_back(rho);
    out.max_trace_error = std::max(out.max_trace_error, std::abs(rho.trace() - trace0));
    if (check_each || last) {
      const double lowest = Eigen::SelfAdjointEigenSolver<DenseMatrix>(rho, Eigen::EigenvaluesOnly)
                                .eigenvalues()
                                .minCoeff();
      out.min_eigenvalue = std::min(out.min_eigenvalue, lowest);
      if (lowest < -1e-6)
        out.warnings.push_back("positivity: eigenvalue " + std::to_string(lowest) + " at t = " +
                               std::to_string(t));
    }
  };
  readout(0.0, readout_points == 1);
  for (std::size_t row = 1; row < readout_points; ++row) {
    if (t_end > 0.0) {
      for (std::uint64_t s = 0; s < steps; ++s) {
        const DensityMatrix k1 = eq.rhs(rho);
        const DensityMatrix k2 = eq.rhs(rho + 0.5 * h * k1);
        const DensityMatrix k3 = eq.rhs(rho + 0.5 * h * k2);
        const DensityMatrix k4 = eq.rhs(rho + h * k3);
        rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        hermitize(rho);
      }
    }
    readout(interval * static_cast<double>(row), row + 1 == readout_points);
  }
  return out;
}

double analytic_ballistic_variance(double J, double t) { return 2.0 * J * J * t * t; }

FreeWalkDensity analytic_free_walk_density(double J, double t, int m,
                                           std::optional<int> boundary_distance) {
  FreeWalkDensity out;
  const double x = 2.0 * std::abs(J) * t;
  const double amp = std::cyl_bessel_j(static_cast<double>(std::abs(m)), x);
  out.value = amp * amp;
  if (boundary_distance) out.boundary_warning = x > static_cast<double>(*boundary_distance) - 5.0;
  return out;
}

double analytic_relative_diffusion(double J, double Gamma) {
  if (!(Gamma > 0.0)) throw ValidationError("Gamma: must be > 0");
  return 16.0 * J * J / Gamma;
}

double analytic_collapse_time(double J, double Gamma) {
  if (!(Gamma > 0.0)) throw ValidationError("Gamma: must be > 0");
  if (J == 0.0) throw ValidationError("J: must be nonzero");
  return std::cbrt(3.0 * std::sqrt(2.0) / (Gamma * J * J));
}

}  // namespace qmon
