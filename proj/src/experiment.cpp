#include "qmon/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qmon/format.hpp"
#include "qmon/io.hpp"
#include "qmon/jump.hpp"
#include "qmon/master.hpp"
#include "qmon/unitary.hpp"

namespace qmon {

namespace {

using nlohmann::ordered_json;

bool wants(const RunConfig& c, const std::string& name) {
  return std::find(c.outputs.begin(), c.outputs.end(), name) != c.outputs.end();
}

StateVector read_amplitudes(const std::filesystem::path& path, std::size_t dimension) {
  std::ifstream in(path);
  if (!in) throw ValidationError("run.initial_state: cannot open " + path.string());
  std::vector<Complex> amps;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    std::istringstream s(line);
    double re = 0.0, im = 0.0;
    if (!(s >> re)) continue;
    s >> im;
    amps.emplace_back(re, im);
  }
  if (amps.size() != dimension)
    throw ValidationError("run.initial_state: " + path.string() + " holds " + std::to_string(amps.size()) +
                          " amplitudes, basis dimension is " + std::to_string(dimension));
  StateVector psi(static_cast<Eigen::Index>(dimension));
  for (std::size_t k = 0; k < dimension; ++k) psi[static_cast<Eigen::Index>(k)] = amps[k];
  return psi;
}

ordered_json fit_json(const DiffusionFit& f) {
  return {{"diffusion", f.diffusion},       {"slope", f.slope},
          {"intercept", f.intercept},       {"r_squared", f.r_squared},
          {"slope_stderr_ols", f.slope_stderr}, {"points", f.points}};
}

// Ensemble of one deterministic record.
EnsembleResult single(const TrajectoryRecord& rec, std::uint64_t seed, const EnsembleOptions& opts) {
  return run_ensemble([&](std::uint64_t, std::uint64_t) { return rec; }, 1, seed, opts);
}

}  // namespace

InitialState make_initial_state(const RunConfig& config, const SystemSpec& spec, const FockBasis* basis) {
  const int first = initial_site(config);
  if (config.initial == InitialKind::File) {
    if (!basis) throw CapacityError("custom initial states need an enumerable basis");
    auto path = std::filesystem::path(config.initial_file);
    if (path.is_relative()) path = config.base_dir / path;
    return InitialState::vector(read_amplitudes(path, basis->dimension()));
  }
  if (spec.statistics == Statistics::Distinguishable) {
    std::vector<ComplexVector> factors;
    for (int i = 0; i < spec.particles; ++i) {
      ComplexVector f = ComplexVector::Zero(spec.sites);
      f[first + i] = 1.0;
      factors.push_back(std::move(f));
    }
    return InitialState::product(std::move(factors));
  }
  if (!basis) throw CapacityError("basis too large for a full state vector");
  std::vector<int> occ(spec.sites, 0);
  for (int i = 0; i < spec.particles; ++i) occ[first + i] = 1;
  return InitialState::vector(basis_state(*basis, occ));
}

RunOutcome run_experiment(const RunConfig& config, const std::filesystem::path& out_dir,
                          const RunContext& context) {
  validate_config(config);
  const SystemSpec spec = system_spec(config);
  const std::size_t points = config.readout_points;
  const bool deterministic =
      config.unraveling == Unraveling::Unitary || config.unraveling == Unraveling::MasterOnly;
  const std::size_t realizations = deterministic ? 1 : config.realizations;

  RecordOptions ro;
  ro.readout_points = points;
  ro.pair_correlation = wants(config, "pair_correlation");
  ro.final_projector = wants(config, "rho");

  EnsembleOptions eo;
  eo.workers = context.workers;
  eo.pair_correlation = ro.pair_correlation;
  eo.density_matrix = ro.final_projector;
  if (config.fit_window && spec.particles == 2) eo.slope_window = config.fit_window;

  ordered_json meta;
  meta["qmon"] = kVersion;
  meta["config_hash"] = hex64(config_hash(config));
  meta["config"] = to_text(config);
  meta["base_seed"] = config.base_seed;
  meta["realizations"] = realizations;
  meta["trajectory_streams"] = "trajectory i draws from the counter stream (base_seed, i)";

  const auto report = validate_report(config);
  ordered_json derived{{"Gamma", report.Gamma},
                       {"sites", report.sites},
                       {"origin", spec.origin},
                       {"basis_dimension", report.basis_dimension},
                       {"regime_at_t_end", report.regime}};
  if (report.collapse_time) derived["t_col"] = *report.collapse_time;
  if (report.diffusive_threshold) derived["diffusive_threshold"] = *report.diffusive_threshold;

  std::shared_ptr<const FockBasis> basis;
  if (basis_dimension(spec.statistics, spec.sites, spec.particles) <= kDefaultBasisCap)
    basis = std::make_shared<const FockBasis>(enumerate_basis(spec));
  const InitialState initial = make_initial_state(config, spec, basis.get());

  RunOutcome outcome;
  outcome.directory = out_dir;
  std::optional<TrajectoryRecord> first_record;
  std::vector<std::string> warnings;

  switch (config.unraveling) {
    case Unraveling::Diffusive: {
      auto params = DiffusiveParams::from_system(spec, config.convention);
      if (config.dt) params.dt = *config.dt;
      const DiffusiveSimulator sim(spec, params, basis);
      derived["dt"] = sim.aligned_dt(config.t_end, points);
      derived["kappa_cm"] = params.kappa_cm;
      derived["kappa_rel"] = params.kappa_rel;
      outcome.ensemble = run_ensemble(
          [&](std::uint64_t seed, std::uint64_t i) { return sim.run(initial, config.t_end, seed, i, ro); },
          realizations, config.base_seed, eo);
      break;
    }
    case Unraveling::Jump: {
      auto psf = config.psf == "gaussian"
                     ? PointSpreadFunction::gaussian(spec.sigma)
                     : PointSpreadFunction::load(std::filesystem::path(config.psf).is_relative()
                                                     ? config.base_dir / config.psf
                                                     : std::filesystem::path(config.psf));
      const JumpSimulator sim(spec, MeasurementModel(spec, std::move(psf)), basis);
      JumpOptions jo;
      jo.record = ro;
      if (config.dt) jo.dt_max = *config.dt;
      derived["dt_max"] = jo.dt_max > 0.0 ? jo.dt_max : sim.default_dt();
      const StateVector psi0 = initial.is_product() ? product_state(*basis, initial.factors) : initial.full;
      // Only trajectory 0 writes first_record, so no lock is needed.
      outcome.ensemble = run_ensemble(
          [&](std::uint64_t seed, std::uint64_t i) {
            auto rec = sim.run(psi0, config.t_end, seed, i, jo);
            if (i == 0) first_record = rec;
            return rec;
          },
          realizations, config.base_seed, eo);
      break;
    }
    case Unraveling::Unitary: {
      const UnitarySimulator sim(spec, basis);
      const double dt = config.dt.value_or(default_unitary_dt(spec));
      derived["dt"] = dt;
      first_record = sim.run(initial, config.t_end, ro, dt);
      outcome.ensemble = single(*first_record, config.base_seed, eo);
      break;
    }
    case Unraveling::MasterOnly: {
      MasterSpec ms;
      ms.variant = config.master_variant;
      ms.system = spec;
      if (config.psf != "gaussian") {
        const std::filesystem::path p(config.psf);
        ms.psf = PointSpreadFunction::load(p.is_relative() ? config.base_dir / p : p);
      }
      const MasterEquation eq(ms, basis);
      const StateVector psi0 = initial.is_product() ? product_state(*basis, initial.factors) : initial.full;
      const double dt = config.dt.value_or(eq.default_dt());
      derived["dt"] = dt;
      const auto series = integrate_master(eq, psi0 * psi0.adjoint(), config.t_end, dt, points);
      warnings = series.warnings;
      derived["max_trace_error"] = series.max_trace_error;
      derived["min_eigenvalue"] = series.min_eigenvalue;
      const ObservableTable table(spec, basis);
      TrajectoryRecord rec = table.make_record(series.times, ro);
      rec.seed = config.base_seed;
      for (std::size_t row = 0; row < series.states.size(); ++row) {
        const RealVector p = series.states[row].diagonal().real();
        table.record(p, row, rec, ro);
        if (ro.pair_correlation) {
          auto& pairs = rec.pair_correlation[row];
          pairs.setZero();
          for (std::size_t k = 0; k < basis->dimension(); ++k) {
            const auto n = basis->occupations(k);
            for (int m = 0; m < spec.sites; ++m)
              for (int l = 0; l < spec.sites; ++l) pairs(m, l) += p[k] * n[m] * n[l];
          }
        }
      }
      if (ro.final_projector) rec.final_projector = series.states.back();
      first_record = rec;
      outcome.ensemble = single(rec, config.base_seed, eo);
      break;
    }
  }
  meta["derived"] = derived;

  const auto& ens = outcome.ensemble;
  Provenance prov;
  prov.config_hash = config_hash(config);
  prov.seed = config.base_seed;
  prov.realizations = realizations;
  prov.generated = context.timestamp.empty() ? utc_timestamp() : context.timestamp;

  auto emit = [&](const std::string& name, const std::vector<std::string>& cols,
                  const std::vector<std::vector<double>>& rows) {
    std::ostringstream s;
    write_csv(s, prov, cols, rows);
    const auto path = out_dir / (name + ".csv");
    write_file(path, s.str());
    outcome.files.push_back(path);
  };
  const auto& schema = csv_schemas();
  const bool ensemble_errors = realizations > 1;

  if (wants(config, "density")) {
    emit("density", schema.at("density"), density_rows(ens.times, ens.density_mean));
    if (ensemble_errors) emit("density_stderr", schema.at("density"), density_rows(ens.times, ens.density_stderr));
  }
  if (wants(config, "xcm")) {
    emit("xcm", schema.at("series"), series_rows(ens.times, ens.xcm.mean));
    if (ensemble_errors) emit("xcm_stderr", schema.at("series"), series_rows(ens.times, ens.xcm.stderr_));
  }
  if (wants(config, "xcm_variance")) {
    emit("xcm_variance", schema.at("series"), series_rows(ens.times, ens.xcm_variance.mean));
    if (ensemble_errors)
      emit("xcm_variance_stderr", schema.at("series"), series_rows(ens.times, ens.xcm_variance.stderr_));
  }
  if (wants(config, "sigma_r2") && spec.particles == 2) {
    emit("sigma_r2", schema.at("series"), series_rows(ens.times, ens.sigma_r2.mean));
    if (ensemble_errors) emit("sigma_r2_stderr", schema.at("series"), series_rows(ens.times, ens.sigma_r2.stderr_));
    std::vector<double> t, ratio;
    for (std::size_t k = 1; k < ens.times.size(); ++k) {
      t.push_back(ens.times[k]);
      ratio.push_back(ens.sigma_r2.mean[k] / ens.times[k]);
    }
    emit("sigma_r2_over_t", schema.at("series"), series_rows(t, ratio));
  }
  if (wants(config, "pair_correlation"))
    emit("pair_correlation", schema.at("pair_correlation"), pair_rows(ens.times, ens.pair_mean));
  if (wants(config, "events") && first_record && config.unraveling == Unraveling::Jump)
    emit("events", schema.at("events"), event_rows(first_record->events));
  if (wants(config, "rho") && ens.rho_mean) emit("rho", schema.at("rho"), rho_rows(*ens.rho_mean));

  if (config.fit_window && spec.particles == 2) {
    try {
      outcome.fit = fit_diffusion_constant(ens.times, ens.sigma_r2.mean, *config.fit_window);
      auto f = fit_json(*outcome.fit);
      if (ens.slope) {
        f["slope_stderr_ensemble"] = ens.slope->stderr_;
        f["diffusion_stderr"] = 0.5 * std::max(outcome.fit->slope_stderr, ens.slope->stderr_);
      } else {
        f["diffusion_stderr"] = 0.5 * outcome.fit->slope_stderr;
      }
      f["window"] = {config.fit_window->start, config.fit_window->end};
      meta["fit"] = f;
    } catch (const FitError& e) {
      outcome.fit_error = e.what();
      meta["fit"] = {{"error", e.what()}};
    }
  }
  if (config.unraveling == Unraveling::Jump)
    meta["jumps_per_trajectory"] = {{"mean", ens.jump_count.mean}, {"stderr", ens.jump_count.stderr_}};
  meta["warnings"] = warnings;
  ordered_json files = ordered_json::array();
  for (const auto& f : outcome.files) files.push_back(f.filename().string());
  meta["files"] = files;
  meta["generated"] = prov.generated;
  const auto meta_path = out_dir / "metadata.json";
  write_file(meta_path, meta.dump(2) + "\n");
  outcome.files.push_back(meta_path);
  return outcome;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"fig3a",         "fig3b",         "fig3c",
                                              "fig3d",         "fig4",          "oracle-ballistic",
                                              "oracle-master", "oracle-jump"};
  return names;
}

Preset make_preset(const std::string& name, std::optional<std::uint64_t> seed,
                   std::optional<std::size_t> realizations) {
  auto base = [&](Statistics s, Unraveling u) {
    RunConfig c;
    c.statistics = s;
    c.unraveling = u;
    c.base_seed = seed.value_or(1);
    return c;
  };
  auto finish = [&](RunConfig& c, std::size_t default_r) { c.realizations = realizations.value_or(default_r); };

  Preset p;
  p.name = name;
  if (name == "fig3a") {
    p.description = "unitary two-boson walk from adjacent sites";
    auto c = base(Statistics::Boson, Unraveling::Unitary);
    c.t_end = 20.0;
    c.readout_points = 201;
    c.outputs = {"density", "xcm", "xcm_variance", "sigma_r2"};
    finish(c, 1);
    p.runs.emplace_back("boson", c);
  } else if (name == "fig3b" || name == "fig3c" || name == "fig3d") {
    const Statistics s = name == "fig3b"   ? Statistics::Distinguishable
                         : name == "fig3c" ? Statistics::Boson
                                           : Statistics::Fermion;
    p.description = "single diffusive trajectory at Gamma = 2";
    auto c = base(s, Unraveling::Diffusive);
    c.Gamma = 2.0;
    c.t_end = 20.0;
    c.readout_points = 201;
    c.outputs = {"density", "xcm", "xcm_variance", "sigma_r2"};
    finish(c, 1);
    p.runs.emplace_back(std::string(to_string(s)), c);
  } else if (name == "fig4") {
    p.description = "relative-distance variance over time at Gamma = 16";
    for (auto s : {Statistics::Distinguishable, Statistics::Boson, Statistics::Fermion}) {
      auto c = base(s, Unraveling::Diffusive);
      c.Gamma = 16.0;
      c.t_end = 6.0;
      c.readout_points = 121;
      c.fit_window = FitWindow{3.0, 6.0};
      c.outputs = {"density", "sigma_r2"};
      finish(c, 1000);
      p.runs.emplace_back(std::string(to_string(s)), c);
    }
  } else if (name == "oracle-ballistic") {
    p.description = "unitary single-particle walk on 81 sites";
    auto c = base(Statistics::Boson, Unraveling::Unitary);
    c.particles = 1;
    c.sites = 81;
    c.initial = InitialKind::SingleSite;
    c.t_end = 15.0;
    c.readout_points = 151;
    c.outputs = {"density", "xcm_variance"};
    finish(c, 1);
    p.runs.emplace_back("unitary", c);
  } else if (name == "oracle-master") {
    p.description = "diffusive ensembles against the unconditional master equation, M = 6";
    for (auto s : {Statistics::Boson, Statistics::Distinguishable}) {
      const std::string tag = s == Statistics::Boson ? "indist" : "dist";
      auto m = base(s, Unraveling::MasterOnly);
      m.sites = 6;
      m.Gamma = 2.0;
      m.t_end = 1.0;
      m.readout_points = 11;
      m.master_variant = s == Statistics::Boson ? MasterVariant::IndistCM : MasterVariant::DistFull;
      m.outputs = {"density", "sigma_r2", "rho"};
      finish(m, 1);
      p.runs.emplace_back("master-" + tag, m);
      auto d = m;
      d.unraveling = Unraveling::Diffusive;
      finish(d, 2000);
      p.runs.emplace_back("diffusive-" + tag, d);
    }
  } else if (name == "oracle-jump") {
    p.description = "high-resolution jumps against the site-resolved master equation";
    auto m = base(Statistics::Boson, Unraveling::MasterOnly);
    m.particles = 1;
    m.sites = 6;
    m.initial = InitialKind::SingleSite;
    m.initial_site = 2;
    m.gamma = 1.0;
    m.sigma = 0.05;
    m.d = 1.0;
    m.t_end = 2.0;
    m.readout_points = 21;
    m.master_variant = MasterVariant::SiteResolved;
    m.outputs = {"density", "rho"};
    finish(m, 1);
    p.runs.emplace_back("master-site-resolved", m);
    auto j = m;
    j.unraveling = Unraveling::Jump;
    finish(j, 5000);
    p.runs.emplace_back("jump", j);
  } else {
    throw ValidationError("preset: unknown name '" + name + "'");
  }
  return p;
}

std::vector<RunOutcome> run_preset(const Preset& preset, const std::filesystem::path& out_dir,
                                   const RunContext& context) {
  std::vector<RunOutcome> outcomes;
  const auto root = out_dir / preset.name;
  for (const auto& [sub, config] : preset.runs) outcomes.push_back(run_experiment(config, root / sub, context));

  ordered_json summary;
  summary["preset"] = preset.name;
  summary["description"] = preset.description;
  ordered_json runs = ordered_json::object();
  for (std::size_t k = 0; k < outcomes.size(); ++k) {
    ordered_json r{{"directory", preset.runs[k].first}};
    if (outcomes[k].fit) r["fit"] = fit_json(*outcomes[k].fit);
    if (!outcomes[k].fit_error.empty()) r["fit_error"] = outcomes[k].fit_error;
    runs[preset.runs[k].first] = r;
  }
  summary["runs"] = runs;
  if (preset.name == "fig4" && !preset.runs.empty()) {
    const auto& c = preset.runs.front().second;
    const double dc = analytic_relative_diffusion(c.hopping, measurement_strength(c));
    summary["D_c"] = dc;
    Provenance prov;
    prov.config_hash = config_hash(c);
    prov.seed = c.base_seed;
    prov.realizations = c.realizations;
    prov.generated = context.timestamp.empty() ? utc_timestamp() : context.timestamp;
    const auto times = readout_times(c.t_end, c.readout_points);
    std::vector<double> t(times.begin() + 1, times.end());
    std::ostringstream s;
    write_csv(s, prov, csv_schemas().at("series"), series_rows(t, std::vector<double>(t.size(), 2.0 * dc)));
    write_file(root / "reference_2Dc.csv", s.str());
  }
  write_file(root / "summary.json", summary.dump(2) + "\n");
  return outcomes;
}

}  // namespace qmon
