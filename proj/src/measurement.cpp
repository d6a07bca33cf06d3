#include "qmon/measurement.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>

namespace qmon {

namespace {

double trapezoid(const std::vector<double>& y, double h) {
  if (y.size() < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) sum += y[i];
  return h * (sum - 0.5 * (y.front() + y.back()));
}

}  // namespace

PointSpreadFunction PointSpreadFunction::gaussian(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("psf sigma must be > 0");
  PointSpreadFunction psf;
  psf.kind_ = PsfKind::Gaussian;
  psf.width_ = sigma;
  return psf;
}

PointSpreadFunction PointSpreadFunction::tabulated(std::vector<double> grid, std::vector<double> values) {
  if (grid.size() != values.size()) throw ValidationError("psf table: column lengths differ");
  if (grid.size() < 3) throw ValidationError("psf table: need at least 3 samples");
  const double h = grid[1] - grid[0];
  if (!(h > 0.0)) throw ValidationError("psf table: X must increase");
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (std::abs((grid[i] - grid[i - 1]) - h) > 1e-6 * h)
      throw ValidationError("psf table: grid is not uniform at row " + std::to_string(i + 1));
  }
  const std::size_t n = grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(grid[i] + grid[n - 1 - i]) > 1e-6 * h)
      throw ValidationError("psf table: grid is not symmetric about X = 0");
    if (std::abs(values[i] - values[n - 1 - i]) > 1e-10)
      throw ValidationError("psf table: f(X) != f(-X) at X = " + std::to_string(grid[i]));
  }
  std::vector<double> sq(n), x2(n);
  for (std::size_t i = 0; i < n; ++i) {
    sq[i] = values[i] * values[i];
    x2[i] = grid[i] * grid[i] * sq[i];
  }
  const double norm = trapezoid(sq, h);
  if (std::abs(norm - 1.0) > 1e-6)
    throw ValidationError("psf table: integral of f^2 is " + std::to_string(norm) + ", expected 1");

  PointSpreadFunction psf;
  psf.kind_ = PsfKind::Tabulated;
  psf.width_ = std::sqrt(trapezoid(x2, h) / norm);
  psf.grid_ = std::move(grid);
  psf.values_ = std::move(values);
  return psf;
}

PointSpreadFunction PointSpreadFunction::parse(std::istream& in) {
  std::vector<double> xs, fs;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    double x, f;
    if (!(row >> x)) continue;  // blank line
    if (!(row >> f)) throw ParseError("psf table line " + std::to_string(line_no) + ": expected two columns");
    std::string extra;
    if (row >> extra) throw ParseError("psf table line " + std::to_string(line_no) + ": trailing data");
    xs.push_back(x);
    fs.push_back(f);
  }
  return tabulated(std::move(xs), std::move(fs));
}

PointSpreadFunction PointSpreadFunction::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open psf table " + path.string());
  return parse(in);
}

double PointSpreadFunction::support() const {
  if (kind_ == PsfKind::Gaussian) return std::numeric_limits<double>::infinity();
  return grid_.back();
}

double PointSpreadFunction::operator()(double x) const {
  if (kind_ == PsfKind::Gaussian) {
    const double s2 = width_ * width_;
    return std::exp(-x * x / (2.0 * s2)) / std::pow(s2 * std::numbers::pi, 0.25);
  }
  if (x < grid_.front() || x > grid_.back()) return 0.0;
  const double h = grid_[1] - grid_[0];
  const double pos = (x - grid_.front()) / h;
  auto i = static_cast<std::size_t>(pos);
  if (i >= grid_.size() - 1) return values_.back();
  const double t = pos - static_cast<double>(i);
  return (1.0 - t) * values_[i] + t * values_[i + 1];
}

double PointSpreadFunction::overlap(double shift) const {
  if (kind_ == PsfKind::Gaussian) return std::exp(-shift * shift / (4.0 * width_ * width_));
  const double h = grid_[1] - grid_[0];
  std::vector<double> integrand(grid_.size());
  for (std::size_t i = 0; i < grid_.size(); ++i) integrand[i] = values_[i] * (*this)(grid_[i] - shift);
  return trapezoid(integrand, h);
}

MeasurementModel::MeasurementModel(const SystemSpec& spec, PointSpreadFunction psf,
                                   std::vector<double> particle_rates)
    : spec_(spec), psf_(std::move(psf)), particle_rates_(std::move(particle_rates)) {
  spec_.validate();
  if (!particle_rates_.empty()) {
    if (static_cast<int>(particle_rates_.size()) != spec_.particles)
      throw ValidationError("particle_rates: need one rate per particle");
    for (double r : particle_rates_)
      if (!(r >= 0.0)) throw ValidationError("particle_rates: rates must be >= 0");
  }

  const int m_sites = spec_.sites;
  const double d = spec_.lattice_constant;
  const double w = psf_.width();
  const double center = site_position(0) + 0.5 * (m_sites - 1) * d;
  double extent = m_sites * d + 6.0 * w;
  if (psf_.kind() == PsfKind::Tabulated) extent = std::max(extent, 0.5 * m_sites * d + psf_.support());
  grid_.spacing = std::min(d, w) / 8.0;
  grid_.points = static_cast<std::size_t>(std::ceil(2.0 * extent / grid_.spacing)) + 1;
  grid_.start = center - extent;

  overlap_.resize(m_sites, m_sites);
  for (int m = 0; m < m_sites; ++m)
    for (int l = 0; l < m_sites; ++l) overlap_(m, l) = psf_.overlap((m - l) * d);

  psf_table_.resize(static_cast<Eigen::Index>(grid_.points), m_sites);
  for (std::size_t g = 0; g < grid_.points; ++g)
    for (int m = 0; m < m_sites; ++m) psf_table_(g, m) = psf_(grid_.at(g) - site_position(m));

  try {
    sigma_eff_ = effective_resolution(psf_, d);
  } catch (const FitError&) {
    sigma_eff_.reset();
  }
}

double MeasurementModel::particle_rate(int particle) const {
  if (particle < 0 || particle >= spec_.particles) throw IndexError("particle index out of range");
  return particle_rates_.empty() ? spec_.gamma : particle_rates_[particle];
}

int channel_count(const FockBasis& basis) {
  return basis.statistics() == Statistics::Distinguishable ? basis.particles() : 1;
}

OperatorMatrix measurement_operator(const MeasurementModel& model, const FockBasis& basis, double x) {
  std::vector<double> f(basis.sites());
  for (int m = 0; m < basis.sites(); ++m) f[m] = model.psf()(x - model.site_position(m));
  const double amp = std::sqrt(model.gamma());
  RealVector d(basis.dimension());
  for (std::size_t k = 0; k < basis.dimension(); ++k) {
    const auto n = basis.occupations(k);
    double s = 0.0;
    for (int m = 0; m < basis.sites(); ++m) s += f[m] * n[m];
    d[k] = amp * s;
  }
  return OperatorMatrix::diagonal(std::move(d));
}

OperatorMatrix measurement_operator(const MeasurementModel& model, const FockBasis& basis,
                                    int particle, double x) {
  if (basis.statistics() != Statistics::Distinguishable)
    throw StatisticsError("per-particle measurement operators need distinguishable particles");
  const double amp = std::sqrt(model.particle_rate(particle));
  RealVector d(basis.dimension());
  for (std::size_t k = 0; k < basis.dimension(); ++k)
    d[k] = amp * model.psf()(x - model.site_position(basis.position(k, particle)));
  return OperatorMatrix::diagonal(std::move(d));
}

OperatorMatrix integrated_mdagm(const MeasurementModel& model, const FockBasis& basis) {
  RealVector d(basis.dimension());
  if (basis.statistics() == Statistics::Distinguishable) {
    double total = 0.0;
    for (int i = 0; i < basis.particles(); ++i) total += model.particle_rate(i) * model.overlap()(0, 0);
    d.setConstant(total);
    return OperatorMatrix::diagonal(std::move(d));
  }
  const auto& f = model.overlap();
  for (std::size_t k = 0; k < basis.dimension(); ++k) {
    const auto n = basis.occupations(k);
    double s = 0.0;
    for (int m = 0; m < basis.sites(); ++m) {
      if (n[m] == 0) continue;
      for (int l = 0; l < basis.sites(); ++l)
        if (n[l] != 0) s += f(m, l) * n[m] * n[l];
    }
    d[k] = model.gamma() * s;
  }
  return OperatorMatrix::diagonal(std::move(d));
}

std::vector<double> channel_rates(const MeasurementModel& model, const FockBasis& basis,
                                  const StateVector& state) {
  const double norm2 = state.squaredNorm();
  if (basis.statistics() == Statistics::Distinguishable) {
    std::vector<double> rates(basis.particles());
    for (int i = 0; i < basis.particles(); ++i)
      rates[i] = model.particle_rate(i) * model.overlap()(0, 0) * norm2;
    return rates;
  }
  return {expectation(integrated_mdagm(model, basis), state).real()};
}

OutcomeDensity outcome_distribution(const MeasurementModel& model, const FockBasis& basis,
                                    const StateVector& state, int channel) {
  if (static_cast<std::size_t>(state.size()) != basis.dimension())
    throw DimensionError("state length does not match basis dimension");
  if (channel < 0 || channel >= channel_count(basis)) throw IndexError("detection channel out of range");

  const auto& table = model.psf_on_grid();
  const auto& grid = model.grid();
  const int sites = basis.sites();
  OutcomeDensity out;
  out.values.assign(grid.points, 0.0);

  if (basis.statistics() == Statistics::Distinguishable) {
    std::vector<double> marginal(sites, 0.0);
    for (std::size_t k = 0; k < basis.dimension(); ++k)
      marginal[basis.position(k, channel)] += std::norm(state[k]);
    const double rate = model.particle_rate(channel);
    for (std::size_t g = 0; g < grid.points; ++g) {
      double s = 0.0;
      for (int x = 0; x < sites; ++x)
        if (marginal[x] > 0.0) s += table(g, x) * table(g, x) * marginal[x];
      out.values[g] = rate * s;
    }
  } else {
    // <n_m n_l> restricted to sites that are ever occupied.
    Eigen::MatrixXd pair = Eigen::MatrixXd::Zero(sites, sites);
    for (std::size_t k = 0; k < basis.dimension(); ++k) {
      const double p = std::norm(state[k]);
      if (p == 0.0) continue;
      const auto n = basis.occupations(k);
      for (int m = 0; m < sites; ++m) {
        if (n[m] == 0) continue;
        for (int l = 0; l < sites; ++l)
          if (n[l] != 0) pair(m, l) += p * n[m] * n[l];
      }
    }
    std::vector<int> support;
    for (int m = 0; m < sites; ++m)
      if (pair(m, m) > 0.0) support.push_back(m);
    for (std::size_t g = 0; g < grid.points; ++g) {
      double s = 0.0;
      for (int m : support) {
        double row = 0.0;
        for (int l : support) row += pair(m, l) * table(g, l);
        s += table(g, m) * row;
      }
      out.values[g] = model.gamma() * s;
    }
  }

  out.total_rate = trapezoid(out.values, grid.spacing);
  if (!(out.total_rate > 0.0)) throw DegenerateError("detection rate is zero; no outcome distribution");
  for (double& v : out.values) v /= out.total_rate;
  return out;
}

double sample_outcome(const OutcomeGrid& grid, const OutcomeDensity& density, double u) {
  const auto& v = density.values;
  std::vector<double> cumulative(v.size(), 0.0);
  for (std::size_t g = 1; g < v.size(); ++g)
    cumulative[g] = cumulative[g - 1] + 0.5 * grid.spacing * (v[g - 1] + v[g]);
  const double target = u * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
  if (it == cumulative.begin()) return grid.start;
  if (it == cumulative.end()) return grid.end();
  const auto g = static_cast<std::size_t>(std::distance(cumulative.begin(), it)) - 1;
  const double width = cumulative[g + 1] - cumulative[g];
  const double frac = width > 0.0 ? (target - cumulative[g]) / width : 0.0;
  return grid.at(g) + frac * grid.spacing;
}

double effective_resolution(const PointSpreadFunction& psf, double lattice_constant) {
  const double d = lattice_constant;
  if (!(d > 0.0)) throw ValidationError("lattice constant must be > 0");
  double sigma = psf.width();
  if (psf.kind() == PsfKind::Tabulated) sigma *= std::numbers::sqrt2;  // rms of f^2 is sigma/sqrt(2) for a Gaussian

  double relative_residual = 0.0;
  for (int iter = 0; iter < 64; ++iter) {
    const int window = static_cast<int>(std::floor(sigma / d + 1e-12));
    if (window < 1)
      throw FitError("psf too narrow: no lattice separation inside the fit window (sigma_eff ~ " +
                     std::to_string(sigma) + ", d = " + std::to_string(d) + ")");
    Eigen::VectorXd y(window);
    Eigen::MatrixXd design(window, window >= 2 ? 2 : 1);
    for (int k = 1; k <= window; ++k) {
      const double s2 = (k * d) * (k * d);
      y[k - 1] = 1.0 - psf.overlap(k * d);
      design(k - 1, 0) = s2;
      if (window >= 2) design(k - 1, 1) = -s2 * s2;
    }
    const Eigen::VectorXd coef = design.colPivHouseholderQr().solve(y);
    const double a = coef[0];
    if (!(a > 0.0)) throw FitError("overlap curvature is not positive; no effective resolution");
    const double y_norm = y.norm();
    relative_residual = y_norm > 0.0 ? (y - design * coef).norm() / y_norm : 0.0;
    const double next = 1.0 / (2.0 * std::sqrt(a));
    const bool settled = static_cast<int>(std::floor(next / d + 1e-12)) == window;
    sigma = next;
    if (settled) break;
  }
  if (relative_residual > 0.1)
    throw FitError("quadratic overlap model residual " + std::to_string(relative_residual) +
                   " exceeds 10% over the fit window");
  return sigma;
}

}  // namespace qmon
