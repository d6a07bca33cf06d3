#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "qmon/config.hpp"
#include "qmon/experiment.hpp"
#include "qmon/format.hpp"
#include "qmon/io.hpp"

using namespace qmon;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("qmon_test_" + name);
  fs::remove_all(dir);
  return dir;
}

const char* kSmall = R"(
[system]
particles = 2
statistics = Fermion
sites = 9

[measurement]
Gamma = 2.0

[run]
unraveling = Diffusive
t_end = 0.5
readout_points = 6
realizations = 5
base_seed = 42
outputs = density, xcm, sigma_r2
)";

}  // namespace

TEST(Config, ParsesAllSections) {
  const auto c = parse(kSmall);
  EXPECT_EQ(c.sites, 9);
  EXPECT_EQ(c.statistics, Statistics::Fermion);
  EXPECT_EQ(c.Gamma, 2.0);
  EXPECT_EQ(c.unraveling, Unraveling::Diffusive);
  EXPECT_EQ(c.realizations, 5u);
  EXPECT_EQ(c.base_seed, 42u);
  EXPECT_EQ(c.outputs, (std::vector<std::string>{"density", "xcm", "sigma_r2"}));
  EXPECT_NO_THROW(validate_config(c));
}

TEST(Config, TextRoundTrip) {
  auto c = parse(kSmall);
  c.fit_window = FitWindow{2.5, 7.0};
  c.dt = 0.1 / 3.0;
  const auto text = to_text(c);
  const auto back = parse(text);
  EXPECT_EQ(to_text(back), text);
  EXPECT_EQ(back.dt, c.dt);
  EXPECT_EQ(config_hash(back), config_hash(c));
  c.base_seed += 1;
  EXPECT_NE(config_hash(back), config_hash(c));
}

TEST(Config, ErrorsNameTheField) {
  auto expect_field = [](const std::string& text, const std::string& field) {
    try {
      validate_config(parse(text));
      ADD_FAILURE() << "accepted: " << text;
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  expect_field("[system]\nstatistics = fermion\nhopping = x\n", "system.hopping");
  expect_field("[system]\nstatistics = anyon\n", "system.statistics");
  expect_field("[system]\nstatistics = boson\ncolor = red\n", "system.color");
  expect_field("[extra]\na = 1\n", "extra");
  expect_field("[system]\nstatistics = boson\n[measurement]\nGamma = 1\ngamma = 1\n", "measurement");
  expect_field("[system]\nstatistics = boson\n[measurement]\nGamma = -1\n", "measurement.Gamma");
  expect_field("[system]\nstatistics = boson\n[measurement]\nGamma = 1\n[run]\nt_end = 0\n", "run.t_end");
  expect_field("[system]\nstatistics = boson\n[measurement]\nGamma = 1\n[run]\noutputs = density, spin\n",
               "run.outputs");
  expect_field("[system]\nstatistics = boson\n[measurement]\nGamma = 1\n[run]\nunraveling = Jump\n",
               "measurement.Gamma");
  expect_field("[system]\nstatistics = boson\nsites = 5\n[measurement]\nGamma = 1\n[run]\ninitial_site = 4\n",
               "run.initial_site");
}

TEST(Config, MalformedTextIsParseError) {
  EXPECT_THROW(parse("[system\nparticles = 2\n"), ParseError);
  EXPECT_THROW(load_config("/nonexistent/qmon.ini"), ParseError);
}

TEST(Config, AutoLatticeMargin) {
  auto c = parse(kSmall);
  c.sites.reset();
  c.t_end = 10.0;
  EXPECT_EQ(resolved_sites(c), 2 * 20 + 9);
  EXPECT_EQ(initial_site(c), 24);
  const auto spec = system_spec(c);
  EXPECT_DOUBLE_EQ(spec.coordinate(24), 0.0);
  EXPECT_DOUBLE_EQ(spec.gamma, 2.0);
  EXPECT_DOUBLE_EQ(spec.sigma, 1.0);
}

TEST(Config, GammaForms) {
  auto c = parse("[system]\nstatistics = boson\n[measurement]\ngamma = 8\nsigma = 2\nd = 1\n");
  EXPECT_DOUBLE_EQ(measurement_strength(c), 2.0);
  c = parse("[system]\nstatistics = boson\n[measurement]\ngamma = 8\nsigma = 2\nd = 0.5\n");
  EXPECT_DOUBLE_EQ(measurement_strength(c), 0.5);
}

TEST(ValidateReport, DerivedTimeScales) {
  auto c = parse(kSmall);
  c.t_end = 10.0;
  const auto r = validate_report(c);
  ASSERT_TRUE(r.ok);
  EXPECT_DOUBLE_EQ(r.Gamma, 2.0);
  EXPECT_NEAR(*r.collapse_time, 1.2849, 1e-4);
  EXPECT_DOUBLE_EQ(*r.diffusive_threshold, 2.0);
  EXPECT_EQ(r.regime, "diffusive");
  EXPECT_EQ(r.basis_dimension, 36u);
  EXPECT_DOUBLE_EQ(r.dt, 0.01 / 8.0);
  const auto text = format_report(r);
  EXPECT_NE(text.find("status: ok"), std::string::npos);
  EXPECT_NE(text.find("t_col: "), std::string::npos);

  c.t_end = 1.0;
  EXPECT_EQ(validate_report(c).regime, "collapse");
  c.t_end = 1.5;
  EXPECT_EQ(validate_report(c).regime, "inertial");

  c.unraveling = Unraveling::MasterOnly;
  c.statistics = Statistics::Distinguishable;
  c.sites = 40;
  const auto big = validate_report(c);
  EXPECT_FALSE(big.ok);
  EXPECT_NE(format_report(big).find("status: invalid"), std::string::npos);
}

TEST(Csv, RoundTrip) {
  Provenance prov;
  prov.config_hash = 0xabcdef;
  prov.seed = 7;
  prov.generated = "2000-01-01T00:00:00Z";
  const std::vector<std::vector<double>> rows{{0.0, 1.0 / 3.0}, {0.1, -2.5e-300}, {0.2, 1e300}};
  std::stringstream s;
  write_csv(s, prov, {"time", "value"}, rows);
  const auto table = read_csv(s);
  EXPECT_EQ(table.rows, rows);
  EXPECT_EQ(table.columns, (std::vector<std::string>{"time", "value"}));
  EXPECT_EQ(table.provenance.at("config_hash"), hex64(0xabcdef));
  EXPECT_EQ(table.provenance.at("seed"), "7");
  for (double v : {0.1, 1.0 / 7.0, std::numeric_limits<double>::denorm_min(), 6.02214076e23})
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
}

TEST(Csv, SchemaViolations) {
  const std::string head =
      "# qmon: x\n# config_hash: 0\n# seed: 1\n# realizations: 1\n# generated: now\n";
  auto bad = [](const std::string& text) {
    std::istringstream in(text);
    EXPECT_THROW(read_csv(in), ParseError) << text;
  };
  bad("# seed: 1\ntime,value\n0,1\n");
  bad(head + "time,speed\n0,1\n");
  bad(head + "time,value\n0,abc\n");
  bad(head + "time,value\n0,1,2\n");
  bad(head);
  std::istringstream ok(head + "time,site,value\n0,1,0.5\n");
  EXPECT_EQ(read_csv(ok).rows.size(), 1u);
}

TEST(RunExperiment, OutputsAreIndependentOfWorkerCount) {
  const auto c = parse(kSmall);
  const auto a = scratch("w1"), b = scratch("w3");
  const auto ra = run_experiment(c, a, RunContext{1, "2000-01-01T00:00:00Z"});
  const auto rb = run_experiment(c, b, RunContext{3, "2000-01-01T00:00:00Z"});
  ASSERT_EQ(ra.files.size(), rb.files.size());
  for (std::size_t k = 0; k < ra.files.size(); ++k) {
    EXPECT_EQ(ra.files[k].filename(), rb.files[k].filename());
    EXPECT_EQ(slurp(ra.files[k]), slurp(rb.files[k])) << ra.files[k];
  }
  for (const char* name : {"density.csv", "density_stderr.csv", "xcm.csv", "xcm_stderr.csv", "sigma_r2.csv",
                           "sigma_r2_stderr.csv", "sigma_r2_over_t.csv", "metadata.json"})
    EXPECT_TRUE(fs::exists(a / name)) << name;

  const auto density = read_csv(a / "density.csv");
  EXPECT_EQ(density.rows.size(), 6u * 9u);
  EXPECT_EQ(density.provenance.at("realizations"), "5");
  EXPECT_EQ(density.provenance.at("config_hash"), hex64(config_hash(c)));

  const auto meta = nlohmann::json::parse(slurp(a / "metadata.json"));
  EXPECT_EQ(meta["generated"], "2000-01-01T00:00:00Z");
  EXPECT_TRUE(meta.contains("derived"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(RunExperiment, MasterOnlyWritesDensityMatrix) {
  auto c = parse(kSmall);
  c.unraveling = Unraveling::MasterOnly;
  c.sites = 6;
  c.realizations = 1;
  c.outputs = {"density", "rho"};
  const auto dir = scratch("master");
  const auto out = run_experiment(c, dir, RunContext{1, "t"});
  const auto rho = read_csv(dir / "rho.csv");
  EXPECT_EQ(rho.rows.size(), 15u * 15u);
  double trace = 0.0;
  for (const auto& r : rho.rows)
    if (r[0] == r[1]) trace += r[2];
  EXPECT_NEAR(trace, 1.0, 1e-8);
  EXPECT_FALSE(fs::exists(dir / "density_stderr.csv"));
  fs::remove_all(dir);
}

TEST(Presets, KnownNames) {
  for (const auto& name : preset_names()) {
    const auto p = make_preset(name, 3, 2);
    EXPECT_FALSE(p.runs.empty()) << name;
    for (const auto& [run, config] : p.runs) {
      EXPECT_NO_THROW(validate_config(config)) << name << "/" << run;
      EXPECT_EQ(config.base_seed, 3u);
    }
  }
  EXPECT_THROW(make_preset("fig9"), ValidationError);
}
