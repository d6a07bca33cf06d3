#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <unsupported/Eigen/MatrixFunctions>

#include "qmon/master.hpp"
#include "qmon/unitary.hpp"

using namespace qmon;

namespace {

SystemSpec spec_of(int sites, int particles, Statistics s, double gamma, double sigma = 1.0, double J = 1.0) {
  SystemSpec spec;
  spec.sites = sites;
  spec.particles = particles;
  spec.statistics = s;
  spec.gamma = gamma;
  spec.sigma = sigma;
  spec.hopping = J;
  return spec;
}

MasterSpec master_of(MasterVariant v, const SystemSpec& s) {
  MasterSpec m;
  m.variant = v;
  m.system = s;
  return m;
}

DensityMatrix random_density(std::size_t dim, unsigned seed) {
  std::srand(seed);
  const DenseMatrix a = DenseMatrix::Random(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
  DensityMatrix rho = a * a.adjoint();
  return rho / rho.trace().real();
}

}  // namespace

TEST(MasterSpec, Validation) {
  EXPECT_THROW(master_of(MasterVariant::DistFull, spec_of(4, 2, Statistics::Boson, 1)).validate(), StatisticsError);
  EXPECT_THROW(master_of(MasterVariant::IndistCM, spec_of(4, 2, Statistics::Distinguishable, 1)).validate(),
               StatisticsError);
  EXPECT_NO_THROW(master_of(MasterVariant::DistFull, spec_of(4, 1, Statistics::Boson, 1)).validate());
  auto m = master_of(MasterVariant::IndistCM, spec_of(4, 2, Statistics::Boson, 1));
  m.psf = PointSpreadFunction::gaussian(1.0);
  EXPECT_THROW(m.validate(), ValidationError);
  EXPECT_THROW(master_variant_from_string("Lindblad"), ValidationError);
  EXPECT_EQ(master_variant_from_string(to_string(MasterVariant::SiteResolved)), MasterVariant::SiteResolved);
  EXPECT_THROW(MasterEquation(master_of(MasterVariant::DistFull, spec_of(33, 2, Statistics::Distinguishable, 1))),
               CapacityError);
}

TEST(MasterEquation, RhsIsTracelessAndHermitian) {
  const std::pair<MasterVariant, Statistics> cases[] = {
      {MasterVariant::IndistCM, Statistics::Boson},         {MasterVariant::IndistCM, Statistics::Fermion},
      {MasterVariant::DistFull, Statistics::Distinguishable}, {MasterVariant::SiteResolved, Statistics::Boson},
      {MasterVariant::SiteResolved, Statistics::Distinguishable}, {MasterVariant::ExactOverlap, Statistics::Boson},
      {MasterVariant::ExactOverlap, Statistics::Distinguishable}};
  for (const auto& [variant, stats] : cases) {
    const MasterEquation eq(master_of(variant, spec_of(5, 2, stats, 1.7, 0.8)));
    const auto rho = random_density(eq.basis().dimension(), 3);
    const auto d = lindblad_rhs(eq, rho);
    EXPECT_LT(std::abs(d.trace()), 1e-10);
    EXPECT_LT((d - d.adjoint()).cwiseAbs().maxCoeff(), 1e-12);
    const auto& R = eq.dephasing_rates();
    EXPECT_EQ((R - R.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(R.diagonal().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(MasterEquation, FockProjectorHasNoDissipation) {
  const auto spec = spec_of(5, 2, Statistics::Boson, 2.0);
  const MasterEquation eq(master_of(MasterVariant::IndistCM, spec));
  const auto psi = basis_state(eq.basis(), {0, 1, 0, 1, 0});
  EXPECT_EQ(eq.dissipator(psi * psi.adjoint()).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MasterEquation, CenterOfMassDecoherenceRate) {
  const double Gamma = 2.0;
  const auto spec = spec_of(6, 2, Statistics::Boson, Gamma);
  const MasterEquation eq(master_of(MasterVariant::IndistCM, spec));
  const auto& b = eq.basis();
  const auto X = build_xcm_operator(spec, b).diagonal_entries();
  for (std::size_t a = 0; a < b.dimension(); a += 3)
    for (std::size_t c = 0; c < b.dimension(); c += 2) {
      const double dx = X(a) - X(c);
      EXPECT_NEAR(eq.dephasing_rates()(a, c), 4 * Gamma / 4 * dx * dx, 1e-12);
    }
}

TEST(MasterEquation, SingleParticleRates) {
  const double Gamma = 3.0;
  const MasterEquation cm(master_of(MasterVariant::IndistCM, spec_of(6, 1, Statistics::Boson, Gamma)));
  const MasterEquation site(master_of(MasterVariant::SiteResolved, spec_of(6, 1, Statistics::Boson, Gamma)));
  for (int n = 0; n < 6; ++n)
    for (int m = 0; m < 6; ++m) {
      EXPECT_NEAR(cm.dephasing_rates()(n, m), Gamma / 4 * (n - m) * (n - m), 1e-12);
      EXPECT_NEAR(site.dephasing_rates()(n, m), n == m ? 0.0 : Gamma, 1e-12);
    }
}

TEST(MasterEquation, DistFullRates) {
  const double Gamma = 2.0;
  const auto spec = spec_of(4, 2, Statistics::Distinguishable, Gamma);
  const MasterEquation eq(master_of(MasterVariant::DistFull, spec));
  const auto& b = eq.basis();
  const auto a = *b.index_of({0, 3}), c = *b.index_of({2, 1});
  EXPECT_NEAR(eq.dephasing_rates()(a, c), Gamma / 4 * (4 + 4), 1e-12);
}

TEST(MasterEquation, ExactOverlapLimits) {
  const double Gamma = 2.0;
  auto rates = [&](MasterVariant v, double sigma) {
    auto s = spec_of(5, 2, Statistics::Boson, Gamma * sigma * sigma, sigma);
    return MasterEquation(master_of(v, s)).dephasing_rates();
  };
  double last = 0.0;
  for (double sigma : {5.0, 10.0, 20.0}) {
    const double err = (rates(MasterVariant::ExactOverlap, sigma) - rates(MasterVariant::IndistCM, sigma)).cwiseAbs().maxCoeff();
    if (last > 0.0) EXPECT_NEAR(std::log2(last / err), 2.0, 0.2);
    last = err;
  }
  const double narrow = (rates(MasterVariant::ExactOverlap, 0.05) - rates(MasterVariant::SiteResolved, 0.05)).cwiseAbs().maxCoeff();
  EXPECT_LT(narrow, 1e-10 * Gamma * 0.05 * 0.05);
}

TEST(IntegrateMaster, ZeroGammaMatchesUnitary) {
  const auto spec = spec_of(6, 2, Statistics::Fermion, 0.0);
  const MasterEquation eq(master_of(MasterVariant::IndistCM, spec));
  std::srand(2);
  StateVector psi = StateVector::Random(eq.basis().dimension());
  normalize(psi);
  const auto series = integrate_master(eq, psi * psi.adjoint(), 1.5, 0.0, 4);
  const DenseMatrix U = (DenseMatrix(Complex(0.0, -1.5) * eq.hamiltonian().to_dense())).exp();
  const StateVector final = U * psi;
  EXPECT_LT((series.states.back() - final * final.adjoint()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_EQ(series.times.size(), 4u);
  EXPECT_DOUBLE_EQ(series.times.back(), 1.5);
}

TEST(IntegrateMaster, DecoherenceFreeStateIsConstant) {
  const auto spec = spec_of(6, 2, Statistics::Boson, 2.0, 1.0, 0.0);
  const MasterEquation eq(master_of(MasterVariant::IndistCM, spec));
  const auto& b = eq.basis();
  StateVector psi = basis_state(b, {0, 1, 0, 1, 0, 0}) + basis_state(b, {0, 0, 2, 0, 0, 0});
  normalize(psi);
  const DensityMatrix rho0 = psi * psi.adjoint();
  const auto series = integrate_master(eq, rho0, 2.0);
  EXPECT_LT((series.states.back() - rho0).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(IntegrateMaster, TraceAndStepConvergence) {
  const auto spec = spec_of(5, 2, Statistics::Boson, 2.0);
  const MasterEquation eq(master_of(MasterVariant::IndistCM, spec));
  const auto rho0 = random_density(eq.basis().dimension(), 7);
  const auto a = integrate_master(eq, rho0, 2.0, 0.0, 5);
  const auto b = integrate_master(eq, rho0, 2.0, eq.default_dt() / 2, 5);
  EXPECT_LT(a.max_trace_error, 1e-8);
  EXPECT_LT((a.states.back() - b.states.back()).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_GT(a.min_eigenvalue, -1e-6);
  EXPECT_TRUE(a.warnings.empty());
  for (const auto& r : a.states) EXPECT_LT((r - r.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(IntegrateMaster, DefaultStep) {
  const MasterEquation eq(master_of(MasterVariant::IndistCM, spec_of(5, 2, Statistics::Boson, 2.0)));
  EXPECT_DOUBLE_EQ(eq.default_dt(), 0.005 * std::min(1.0, 1.0 / eq.max_rate()));
  EXPECT_THROW(integrate_master(eq, random_density(3, 1), 1.0), DimensionError);
}

TEST(IntegrateMaster, SiteResolvedDiffusionConstant) {
  // Strong on-site dephasing at rate Gamma/4 turns hopping into diffusion with D = 8 J^2 / Gamma.
  const double Gamma = 24.0;
  const int M = 41;
  auto spec = spec_of(M, 1, Statistics::Boson, Gamma / 4);
  spec.origin = (M - 1) / 2;
  const MasterEquation eq(master_of(MasterVariant::SiteResolved, spec));
  const auto psi = basis_state(eq.basis(), [&] {
    std::vector<int> occ(M, 0);
    occ[(M - 1) / 2] = 1;
    return occ;
  }());
  const auto series = integrate_master(eq, psi * psi.adjoint(), 15.0, 0.0, 4);
  auto spread = [&](const DensityMatrix& r) {
    double s = 0.0;
    for (int m = 0; m < M; ++m) s += r(m, m).real() * spec.coordinate(m) * spec.coordinate(m);
    return s;
  };
  const double slope = (spread(series.states[3]) - spread(series.states[2])) / (series.times[3] - series.times[2]);
  EXPECT_NEAR(slope / 2, 8.0 / Gamma, 0.02 * 8.0 / Gamma);
}

TEST(Analytic, BallisticVariance) {
  EXPECT_EQ(analytic_ballistic_variance(1.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(analytic_ballistic_variance(1.0, 3.0), 18.0);
}

TEST(Analytic, FreeWalkDensity) {
  EXPECT_EQ(analytic_free_walk_density(1.0, 0.0, 0).value, 1.0);
  EXPECT_EQ(analytic_free_walk_density(1.0, 0.0, 3).value, 0.0);
  double total = 0.0;
  for (int m = -60; m <= 60; ++m) total += analytic_free_walk_density(1.0, 7.0, m).value;
  EXPECT_NEAR(total, 1.0, 1e-10);
  EXPECT_FALSE(analytic_free_walk_density(1.0, 5.0, 0, 40).boundary_warning);
  EXPECT_TRUE(analytic_free_walk_density(1.0, 5.0, 0, 14).boundary_warning);

  // Against the exact propagator of a chain much wider than the wavefront.
  const int M = 61, c = 30;
  const auto spec = spec_of(M, 1, Statistics::Boson, 0.0);
  const DenseMatrix H = build_hamiltonian(spec, enumerate_basis(spec)).to_dense();
  const DenseMatrix U = (DenseMatrix(Complex(0.0, -3.0) * H)).exp();
  for (int m = -10; m <= 10; ++m) EXPECT_NEAR(std::norm(U(c + m, c)), analytic_free_walk_density(1.0, 3.0, m).value, 1e-12);
}

TEST(Analytic, DiffusionAndCollapseScales) {
  EXPECT_DOUBLE_EQ(analytic_relative_diffusion(1.0, 16.0), 1.0);
  EXPECT_LT(analytic_relative_diffusion(1.0, 1e9), 1e-7);
  EXPECT_NEAR(analytic_collapse_time(1.0, 2.0), 1.2849, 1e-4);
  EXPECT_LT(analytic_collapse_time(1.0, 1e12), 1e-3);
  EXPECT_THROW(analytic_relative_diffusion(1.0, 0.0), ValidationError);
}
