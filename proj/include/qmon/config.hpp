#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qmon/diffusive.hpp"
#include "qmon/ensemble.hpp"
#include "qmon/master.hpp"
#include "qmon/system.hpp"

namespace qmon {

enum class Unraveling { Jump, Diffusive, MasterOnly, Unitary };

std::string_view to_string(Unraveling u);
Unraveling unraveling_from_string(std::string_view name);

enum class InitialKind { AdjacentPair, SingleSite, File };

/// Declarative description of one run. The text form is INI-like:
///
///   [system]      particles, statistics, hopping, interaction, sites
///   [measurement] Gamma | (gamma, sigma, d), normalization_convention, psf
///   [run]         unraveling, initial_state, initial_site, t_end, dt,
///                 readout_points, realizations, base_seed, outputs,
///                 fit_window, master_variant
///
/// `sites = auto` (the default) picks M = 2 ceil(2 J t_end) + 9 so the
/// ballistic wavefront never reaches the boundary. Coordinates are measured
/// from the lattice center. With the Gamma form the model uses
/// gamma = Gamma, sigma = d = 1.
struct RunConfig {
  // [system]
  std::optional<int> sites;  // empty: auto margin
  int particles = 2;
  std::optional<Statistics> statistics;
  double hopping = 1.0;
  double interaction = 0.0;

  // [measurement]
  std::optional<double> Gamma;
  std::optional<double> gamma;
  std::optional<double> sigma;
  std::optional<double> d;
  RateConvention convention = RateConvention::EqualGamma;
  std::string psf = "gaussian";  // or a path to a tabulated profile

  // [run]
  Unraveling unraveling = Unraveling::Diffusive;
  InitialKind initial = InitialKind::AdjacentPair;
  std::optional<int> initial_site;  // empty: lattice center
  std::string initial_file;
  double t_end = 1.0;
  std::optional<double> dt;  // empty: unraveling default
  std::size_t readout_points = 200;
  std::size_t realizations = 1;
  std::uint64_t base_seed = 1;
  std::vector<std::string> outputs{"density", "xcm", "sigma_r2"};
  std::optional<FitWindow> fit_window;
  MasterVariant master_variant = MasterVariant::IndistCM;

  /// Directory against which relative file paths are resolved.
  std::filesystem::path base_dir;
};

/// Parse the text form. Throws ParseError for malformed text and
/// ValidationError naming the field for bad values or unknown keys.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Canonical text form; parse_config(to_text(c)) reproduces c.
std::string to_text(const RunConfig& config);

/// Throws ValidationError naming the first offending field.
void validate_config(const RunConfig& config);

/// The observables a run can emit.
const std::vector<std::string>& known_outputs();

int resolved_sites(const RunConfig& config);
/// First occupied site of the named initial state (lattice center by default).
int initial_site(const RunConfig& config);
SystemSpec system_spec(const RunConfig& config);
double measurement_strength(const RunConfig& config);

/// Derived quantities reported by `qmon validate`.
struct ValidationReport {
  bool ok = true;
  std::vector<std::string> errors;
  double Gamma = 0.0;
  int sites = 0;
  double dt = 0.0;
  std::uint64_t basis_dimension = 0;
  double memory_bytes = 0.0;
  std::optional<double> collapse_time;
  std::optional<double> diffusive_threshold;  // 4 sigma^2 / (gamma d^2)
  std::string regime;                         // at t_end
};

ValidationReport validate_report(const RunConfig& config);
std::string format_report(const ValidationReport& report);

/// 64-bit FNV-1a of the canonical text form.
std::uint64_t config_hash(const RunConfig& config);

}  // namespace qmon
