#include "qmon/ensemble.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>

namespace qmon {

namespace {

// Welford running mean and sum of squared deviations over flat arrays.
class Welford {
 public:
  void add(const Eigen::Ref<const Eigen::ArrayXd>& x) {
    if (count_ == 0) {
      mean_ = Eigen::ArrayXd::Zero(x.size());
      m2_ = Eigen::ArrayXd::Zero(x.size());
    }
    if (x.size() != mean_.size()) throw DimensionError("trajectory records differ in shape");
    ++count_;
    const Eigen::ArrayXd delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }

  const Eigen::ArrayXd& mean() const { return mean_; }
  Eigen::ArrayXd stderr_() const {
    if (count_ < 2) return Eigen::ArrayXd::Zero(mean_.size());
    const double n = static_cast<double>(count_);
    return (m2_ / (n - 1.0) / n).max(0.0).sqrt();
  }
  Eigen::ArrayXd stddev() const {
    if (count_ < 2) return Eigen::ArrayXd::Zero(mean_.size());
    return (m2_ / (static_cast<double>(count_) - 1.0)).max(0.0).sqrt();
  }

 private:
  std::size_t count_ = 0;
  Eigen::ArrayXd mean_;
  Eigen::ArrayXd m2_;
};

Eigen::Map<const Eigen::ArrayXd> as_array(const std::vector<double>& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

Eigen::Map<const Eigen::ArrayXd> as_array(const Eigen::MatrixXd& m) {
  return {m.data(), m.size()};
}

SeriesStats to_series(const Welford& w) {
  SeriesStats s;
  const auto& m = w.mean();
  const Eigen::ArrayXd e = w.stderr_();
  s.mean.assign(m.data(), m.data() + m.size());
  s.stderr_.assign(e.data(), e.data() + e.size());
  return s;
}

Eigen::MatrixXd reshape(const Eigen::ArrayXd& a, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const Eigen::MatrixXd>(a.data(), rows, cols);
}

struct Accumulators {
  Welford density, xcm, xcm_var, sigma_r2, pairs, rho_re, rho_im, slope, jumps;
  Eigen::Index pair_block = 0;
  Eigen::Index rho_dim = 0;
};

struct Line {
  double slope = 0.0, intercept = 0.0, r_squared = 0.0, slope_stderr = 0.0;
  std::size_t points = 0;
};

Line least_squares(std::span<const double> t, std::span<const double> y, FitWindow w) {
  if (t.size() != y.size()) throw DimensionError("times and series differ in length");
  double st = 0.0, sy = 0.0;
  std::size_t n = 0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= w.start && t[k] <= w.end) {
      st += t[k];
      sy += y[k];
      ++n;
    }
  Line line;
  line.points = n;
  if (n < 3) throw FitError("fit window holds " + std::to_string(n) + " points; need at least 3");
  const double tm = st / n, ym = sy / n;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k)
    if (t[k] >= w.start && t[k] <= w.end) {
      stt += (t[k] - tm) * (t[k] - tm);
      sty += (t[k] - tm) * (y[k] - ym);
      syy += (y[k] - ym) * (y[k] - ym);
    }
  if (!(stt > 0.0)) throw FitError("fit window has no spread in time");
  line.slope = sty / stt;
  line.intercept = ym - line.slope * tm;
  const double ssr = std::max(0.0, syy - line.slope * sty);
  line.r_squared = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  line.slope_stderr = std::sqrt(ssr / static_cast<double>(n - 2) / stt);
  return line;
}

}  // namespace

std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("QMON_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

EnsembleResult run_ensemble(const TrajectoryTask& task, std::size_t realizations,
                            std::uint64_t base_seed, const EnsembleOptions& options) {
  if (realizations < 1) throw ValidationError("realizations: must be >= 1");
  const std::size_t workers = resolve_workers(options.workers);
  const std::size_t batch = std::max<std::size_t>(options.batch, workers);

  EnsembleResult result;
  result.realizations = realizations;
  result.base_seed = base_seed;
  Accumulators acc;
  std::optional<FitWindow> window = options.slope_window;

  auto fold = [&](const TrajectoryRecord& rec) {
    if (result.times.empty()) {
      result.times = rec.times;
      result.statistics = rec.statistics;
      result.sites = rec.sites;
      result.particles = rec.particles;
    }
    acc.density.add(as_array(rec.density));
    acc.xcm.add(as_array(rec.xcm));
    acc.xcm_var.add(as_array(rec.xcm_variance));
    if (!rec.sigma_r2.empty()) acc.sigma_r2.add(as_array(rec.sigma_r2));
    if (options.pair_correlation) {
      if (rec.pair_correlation.empty()) throw ValidationError("pair correlations were not recorded");
      Eigen::ArrayXd flat(rec.sites * rec.sites * static_cast<Eigen::Index>(rec.pair_correlation.size()));
      Eigen::Index off = 0;
      for (const auto& m : rec.pair_correlation) {
        flat.segment(off, m.size()) = as_array(m);
        off += m.size();
      }
      acc.pair_block = rec.sites;
      acc.pairs.add(flat);
    }
    if (options.density_matrix) {
      if (!rec.final_projector) throw ValidationError("final projector was not recorded");
      const auto& rho = *rec.final_projector;
      acc.rho_dim = rho.rows();
      acc.rho_re.add(Eigen::Map<const Eigen::ArrayXd>(rho.real().eval().data(), rho.size()));
      acc.rho_im.add(Eigen::Map<const Eigen::ArrayXd>(rho.imag().eval().data(), rho.size()));
    }
    if (window) {
      Eigen::ArrayXd s(1);
      s[0] = window_slope(rec.times, rec.sigma_r2, *window);
      acc.slope.add(s);
    }
    Eigen::ArrayXd j(1);
    j[0] = static_cast<double>(rec.events.size());
    acc.jumps.add(j);
  };

  std::vector<std::optional<TrajectoryRecord>> slots(batch);
  std::vector<std::exception_ptr> errors(batch);
  for (std::size_t first = 0; first < realizations; first += batch) {
    const std::size_t count = std::min(batch, realizations - first);
    for (std::size_t k = 0; k < count; ++k) {
      slots[k].reset();
      errors[k] = nullptr;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t k; (k = next.fetch_add(1)) < count;) {
        try {
          slots[k] = task(base_seed, first + k);
        } catch (...) {
          errors[k] = std::current_exception();
        }
      }
    };
    const std::size_t threads = std::min(workers, count);
    if (threads <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
    }
    for (std::size_t k = 0; k < count; ++k) {
      if (errors[k]) {
        try {
          std::rethrow_exception(errors[k]);
        } catch (const std::exception& e) {
          throw TrajectoryError(first + k, e.what());
        }
      }
      fold(*slots[k]);
      slots[k].reset();
    }
  }

  const auto rows = static_cast<Eigen::Index>(result.times.size());
  result.density_mean = reshape(acc.density.mean(), rows, result.sites);
  result.density_stderr = reshape(acc.density.stderr_(), rows, result.sites);
  result.xcm = to_series(acc.xcm);
  result.xcm_variance = to_series(acc.xcm_var);
  if (result.particles == 2) result.sigma_r2 = to_series(acc.sigma_r2);
  if (options.pair_correlation) {
    const Eigen::Index block = acc.pair_block * acc.pair_block;
    const Eigen::ArrayXd mean = acc.pairs.mean(), err = acc.pairs.stderr_();
    for (Eigen::Index r = 0; r < rows; ++r) {
      result.pair_mean.push_back(reshape(mean.segment(r * block, block), acc.pair_block, acc.pair_block));
      result.pair_stderr.push_back(reshape(err.segment(r * block, block), acc.pair_block, acc.pair_block));
    }
  }
  if (options.density_matrix) {
    const Eigen::Index d = acc.rho_dim;
    DensityMatrix rho(d, d);
    rho.real() = reshape(acc.rho_re.mean(), d, d);
    rho.imag() = reshape(acc.rho_im.mean(), d, d);
    result.rho_mean = std::move(rho);
    result.rho_stderr_real = reshape(acc.rho_re.stderr_(), d, d);
    result.rho_stderr_imag = reshape(acc.rho_im.stderr_(), d, d);
  }
  if (window)
    result.slope = ScalarStats{acc.slope.mean()[0], acc.slope.stderr_()[0], acc.slope.stddev()[0]};
  result.jump_count = ScalarStats{acc.jumps.mean()[0], acc.jumps.stderr_()[0], acc.jumps.stddev()[0]};
  return result;
}

std::vector<double> relative_distance_variance(const TrajectoryRecord& record) {
  if (record.particles != 2) throw StatisticsError("relative distance variance needs N = 2");
  return record.sigma_r2;
}

SeriesStats relative_distance_variance(const EnsembleResult& result) {
  if (result.particles != 2) throw StatisticsError("relative distance variance needs N = 2");
  return result.sigma_r2;
}

DiffusionFit fit_diffusion_constant(std::span<const double> times, std::span<const double> series,
                                    FitWindow window) {
  const Line line = least_squares(times, series, window);
  if (line.r_squared < 0.9)
    throw FitError("R^2 = " + std::to_string(line.r_squared) + " < 0.9; series is not yet diffusive");
  return DiffusionFit{line.slope / 2.0, line.slope, line.intercept, line.r_squared,
                      line.slope_stderr, line.points};
}

double window_slope(std::span<const double> times, std::span<const double> series, FitWindow window) {
  return least_squares(times, series, window).slope;
}

}  // namespace qmon
