#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <unsupported/Eigen/MatrixFunctions>

#include "qmon/ensemble.hpp"
#include "qmon/jump.hpp"
#include "qmon/unitary.hpp"

using namespace qmon;

namespace {

SystemSpec spec_of(int sites, int particles, Statistics s, double gamma, double sigma, double J = 1.0) {
  SystemSpec spec;
  spec.sites = sites;
  spec.particles = particles;
  spec.statistics = s;
  spec.gamma = gamma;
  spec.sigma = sigma;
  spec.hopping = J;
  return spec;
}

JumpSimulator simulator(const SystemSpec& spec) {
  return JumpSimulator(spec, MeasurementModel(spec, PointSpreadFunction::gaussian(spec.sigma)));
}

StateVector random_state(std::size_t dim, unsigned seed) {
  std::srand(seed);
  StateVector v = StateVector::Random(static_cast<Eigen::Index>(dim));
  normalize(v);
  return v;
}

}  // namespace

TEST(NoCountGenerator, SingleParticleDecayIsUniform) {
  const auto sim = simulator(spec_of(5, 1, Statistics::Boson, 1.6, 0.7));
  const DenseMatrix G = sim.generator().to_dense();
  const DenseMatrix anti = (G - G.adjoint()) / Complex(0.0, 2.0);
  const DenseMatrix expected = -0.8 * DenseMatrix::Identity(5, 5);
  EXPECT_LT((anti - expected).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(NoCountGenerator, ZeroGammaIsHamiltonian) {
  const auto spec = spec_of(4, 2, Statistics::Boson, 0.0, 1.0);
  const auto sim = simulator(spec);
  EXPECT_LT((sim.generator().to_dense() - build_hamiltonian(spec, sim.basis()).to_dense()).norm(), 1e-15);
}

TEST(NoCountGenerator, BunchedAndSeparatedDecayDiffer) {
  const double sigma = 1.0, gamma = 1.0;
  const auto spec = spec_of(4, 2, Statistics::Boson, gamma, sigma);
  const auto sim = simulator(spec);
  const auto& b = sim.basis();
  const DenseMatrix G = sim.generator().to_dense();
  const DenseMatrix anti = (G - G.adjoint()) / Complex(0.0, 2.0);
  const auto bunched = *b.index_of({0, 2, 0, 0});
  const auto separated = *b.index_of({1, 0, 1, 0});
  EXPECT_NEAR(anti(bunched, bunched).real(), -0.5 * 4 * gamma, 1e-12);
  EXPECT_NEAR(anti(separated, separated).real(), -0.5 * 2 * gamma * (1 + std::exp(-1.0)), 1e-12);
  Eigen::SelfAdjointEigenSolver<DenseMatrix> es(anti);
  EXPECT_LE(es.eigenvalues().maxCoeff(), 1e-14);
}

TEST(EvolveNoCount, MatchesMatrixExponential) {
  for (auto s : {Statistics::Boson, Statistics::Fermion, Statistics::Distinguishable}) {
    const auto sim = simulator(spec_of(5, 2, s, 1.0, 1.0));
    const auto psi = random_state(sim.basis().dimension(), 11);
    const double dt = sim.default_dt();
    const DenseMatrix U = (DenseMatrix(Complex(0.0, -dt) * sim.generator().to_dense())).exp();
    EXPECT_LT((evolve_nocount(psi, sim.generator(), dt) - U * psi).norm(), 1e-8);
  }
}

TEST(EvolveNoCount, NormNonIncreasing) {
  const auto sim = simulator(spec_of(5, 2, Statistics::Boson, 2.0, 0.8));
  StateVector psi = random_state(sim.basis().dimension(), 3);
  double last = 1.0;
  for (int k = 0; k < 50; ++k) {
    psi = evolve_nocount(psi, sim.generator(), sim.default_dt());
    EXPECT_LE(psi.squaredNorm(), last);
    last = psi.squaredNorm();
  }
}

TEST(EvolveNoCount, UnitaryWithoutMeasurement) {
  const auto sim = simulator(spec_of(6, 2, Statistics::Fermion, 0.0, 1.0));
  const StateVector psi = evolve_nocount(random_state(sim.basis().dimension(), 5), sim.generator(), sim.default_dt());
  EXPECT_NEAR(psi.squaredNorm(), 1.0, 1e-10);
}

TEST(EvolveNoCount, ScalarDecayWithoutHopping) {
  const double gamma = 1.4;
  const auto sim = simulator(spec_of(4, 1, Statistics::Boson, gamma, 0.9, 0.0));
  const StateVector psi0 = random_state(4, 8);
  StateVector psi = psi0;
  const int steps = 200;
  const double dt = 0.005;
  for (int k = 0; k < steps; ++k) psi = evolve_nocount(psi, sim.generator(), dt);
  EXPECT_LT((psi - std::exp(-0.5 * gamma * steps * dt) * psi0).norm(), 1e-10);
}

TEST(EvolveNoCount, SeparatedComponentGains) {
  const double gamma = 1.0, sigma = 1.0;
  const auto sim = simulator(spec_of(4, 2, Statistics::Boson, gamma, sigma, 0.0));
  const auto& b = sim.basis();
  const auto bunched = *b.index_of({0, 2, 0, 0});
  const auto separated = *b.index_of({1, 0, 1, 0});
  StateVector psi = StateVector::Zero(b.dimension());
  psi(bunched) = psi(separated) = 1.0 / std::sqrt(2.0);
  const double dt = sim.default_dt();
  const int steps = 400;
  for (int k = 0; k < steps; ++k) psi = evolve_nocount(psi, sim.generator(), dt);
  const double rate_bunched = 4 * gamma, rate_separated = 2 * gamma * (1 + std::exp(-1.0));
  const double expected = std::exp((rate_bunched - rate_separated) * steps * dt);
  EXPECT_NEAR(std::norm(psi(separated)) / std::norm(psi(bunched)), expected, 1e-8);
  EXPECT_GT(std::norm(psi(separated)), std::norm(psi(bunched)));
}

TEST(WaitingTime, ExponentialLawWithoutHopping) {
  const double gamma = 2.0;
  const auto sim = simulator(spec_of(3, 1, Statistics::Boson, gamma, 0.5, 0.0));
  const StateVector psi = random_state(3, 1);
  const int n = 10000;
  std::vector<double> times;
  for (int i = 0; i < n; ++i) {
    CounterRng rng(77, static_cast<std::uint64_t>(i));
    const auto w = sample_jump_time(psi, sim.generator(), rng, 100.0, sim.default_dt());
    ASSERT_TRUE(w.jumped);
    EXPECT_NEAR(w.pre_jump_norm * w.pre_jump_norm, std::exp(-gamma * w.time), 1e-9);
    times.push_back(w.time);
  }
  std::sort(times.begin(), times.end());
  double ks = 0.0;
  for (int i = 0; i < n; ++i) {
    const double F = 1.0 - std::exp(-gamma * times[i]);
    ks = std::max({ks, std::abs(F - double(i) / n), std::abs(F - double(i + 1) / n)});
  }
  // Kolmogorov-Smirnov critical value at the 0.1% level.
  EXPECT_LT(ks, 1.95 / std::sqrt(double(n)));
}

TEST(WaitingTime, ThresholdMatchesUniformDraw) {
  const auto sim = simulator(spec_of(5, 2, Statistics::Boson, 1.0, 0.7));
  const StateVector psi = random_state(sim.basis().dimension(), 2);
  for (std::uint64_t i = 0; i < 20; ++i) {
    CounterRng rng(5, i), copy(5, i);
    const double u = copy.next_uniform();
    const auto w = sample_jump_time(psi, sim.generator(), rng, 50.0, sim.default_dt());
    ASSERT_TRUE(w.jumped);
    EXPECT_NEAR(w.pre_jump_norm * w.pre_jump_norm, u, 1e-9 * std::max(u, 1e-3));
    EXPECT_NEAR(w.state.squaredNorm(), 1.0, 1e-10);
  }
}

TEST(WaitingTime, NeverJumpsWithoutMeasurement) {
  const auto sim = simulator(spec_of(4, 1, Statistics::Boson, 0.0, 1.0));
  CounterRng rng(1, 1);
  const auto w = sample_jump_time(random_state(4, 4), sim.generator(), rng, 5.0, 0.01);
  EXPECT_FALSE(w.jumped);
  EXPECT_DOUBLE_EQ(w.time, 5.0);
}

TEST(ApplyJump, HighResolutionCollapses) {
  const auto sim = simulator(spec_of(5, 1, Statistics::Boson, 1.0, 0.05));
  const auto& b = sim.basis();
  StateVector psi = basis_state(b, {1, 0, 0, 0, 0}) + basis_state(b, {0, 0, 0, 1, 0});
  normalize(psi);
  for (std::uint64_t i = 0; i < 20; ++i) {
    CounterRng rng(3, i);
    const auto [post, event] = sim.apply_jump(psi, 0.5, rng);
    const double p0 = std::norm(post(0)), p3 = std::norm(post(3));
    EXPECT_GT(std::max(p0, p3), 1.0 - 1e-9);
    EXPECT_NEAR(event.outcome, p0 > p3 ? 0.0 : 3.0, 0.3);
    EXPECT_EQ(event.time, 0.5);
  }
}

TEST(ApplyJump, WeakResolutionBarelyDisturbs) {
  const auto sim = simulator(spec_of(5, 1, Statistics::Boson, 1.0, 60.0));
  const auto& b = sim.basis();
  StateVector psi = basis_state(b, {1, 0, 0, 0, 0}) + basis_state(b, {0, 1, 0, 0, 0});
  normalize(psi);
  CounterRng rng(3, 3);
  const auto [post, event] = sim.apply_jump(psi, 0.0, rng);
  EXPECT_GT(std::norm(psi.dot(post)), 0.999);
}

TEST(ApplyJump, FockStaysFock) {
  const auto sim = simulator(spec_of(4, 2, Statistics::Boson, 1.0, 0.8));
  const auto psi = basis_state(sim.basis(), {0, 1, 1, 0});
  CounterRng rng(1, 0);
  const auto [post, event] = sim.apply_jump(psi, 0.0, rng);
  EXPECT_NEAR(std::norm(post(*sim.basis().index_of({0, 1, 1, 0}))), 1.0, 1e-14);
  const auto idle = simulator(spec_of(4, 2, Statistics::Boson, 0.0, 0.8));
  EXPECT_THROW(idle.apply_jump(psi, 0.0, rng), DegenerateError);
}

TEST(JumpTrajectory, ZeroGammaMatchesUnitary) {
  const auto spec = spec_of(9, 1, Statistics::Boson, 0.0, 1.0);
  const auto sim = simulator(spec);
  const auto psi = basis_state(sim.basis(), {0, 0, 0, 0, 1, 0, 0, 0, 0});
  JumpOptions opts;
  opts.record.readout_points = 11;
  const auto rec = sim.run(psi, 2.0, 1, 0, opts);
  EXPECT_TRUE(rec.events.empty());
  const auto ref = UnitarySimulator(spec).run(InitialState::vector(psi), 2.0, opts.record);
  EXPECT_LT((rec.density - ref.density).cwiseAbs().maxCoeff(), 1e-7);
}

TEST(JumpTrajectory, ReproducibleAndWellFormed) {
  const auto spec = spec_of(6, 2, Statistics::Boson, 1.5, 0.6);
  const auto sim = simulator(spec);
  const auto psi = basis_state(sim.basis(), {0, 0, 1, 1, 0, 0});
  JumpOptions opts;
  opts.record.readout_points = 21;
  const auto a = sim.run(psi, 3.0, 42, 7, opts);
  const auto b = sim.run(psi, 3.0, 42, 7, opts);
  const auto c = sim.run(psi, 3.0, 42, 8, opts);
  ASSERT_FALSE(a.events.empty());
  ASSERT_EQ(a.events.size(), b.events.size());
  for (std::size_t k = 0; k < a.events.size(); ++k) {
    EXPECT_EQ(a.events[k].time, b.events[k].time);
    EXPECT_EQ(a.events[k].outcome, b.events[k].outcome);
    if (k) EXPECT_GT(a.events[k].time, a.events[k - 1].time);
    EXPECT_GE(a.events[k].outcome, sim.model().grid().start);
    EXPECT_LE(a.events[k].outcome, sim.model().grid().end());
  }
  EXPECT_EQ(a.noise_checksum, b.noise_checksum);
  EXPECT_NE(a.noise_checksum, c.noise_checksum);
  for (Eigen::Index t = 0; t < a.density.rows(); ++t) EXPECT_NEAR(a.density.row(t).sum(), 2.0, 1e-10);
}

TEST(JumpTrajectory, DistinguishableChannels) {
  const auto spec = spec_of(5, 2, Statistics::Distinguishable, 1.0, 0.5);
  const auto sim = simulator(spec);
  const auto rec = sim.run(basis_state(sim.basis(), {2, 3}), 3.0, 9, 0);
  bool seen[2] = {false, false};
  for (const auto& e : rec.events) {
    ASSERT_GE(e.channel, 0);
    ASSERT_LT(e.channel, 2);
    seen[e.channel] = true;
  }
  EXPECT_TRUE(seen[0] && seen[1]);
}

TEST(JumpTrajectory, WeakResolutionCountStatistics) {
  const double gamma = 1.0, t = 2.0;
  const auto spec = spec_of(5, 2, Statistics::Boson, gamma, 25.0);
  const auto sim = simulator(spec);
  const auto psi = basis_state(sim.basis(), {0, 1, 1, 0, 0});
  JumpOptions opts;
  opts.record.readout_points = 2;
  const TrajectoryTask task = [&](std::uint64_t seed, std::uint64_t i) { return sim.run(psi, t, seed, i, opts); };
  EnsembleOptions eopts;
  eopts.workers = 1;
  const auto res = run_ensemble(task, 2000, 11, eopts);
  const double mean = gamma * 4 * t;
  EXPECT_NEAR(res.jump_count.mean, mean, 3 * res.jump_count.stderr_ + 0.02 * mean);
  EXPECT_NEAR(res.jump_count.stddev, 2 * std::sqrt(gamma * t), 0.1 * 2 * std::sqrt(gamma * t));
}
