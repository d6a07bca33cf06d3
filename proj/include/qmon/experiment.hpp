#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qmon/config.hpp"
#include "qmon/ensemble.hpp"

namespace qmon {

struct RunContext {
  std::size_t workers = 0;  // 0: automatic
  /// Timestamp written into provenance headers; empty uses the clock.
  std::string timestamp;
};

struct RunOutcome {
  std::filesystem::path directory;
  std::vector<std::filesystem::path> files;
  EnsembleResult ensemble;
  std::optional<DiffusionFit> fit;
  std::string fit_error;
};

/// Initial state of a config over `basis` (full vector), or product factors
/// for distinguishable adjacent pairs.
InitialState make_initial_state(const RunConfig& config, const SystemSpec& spec,
                                const FockBasis* basis);

/// Run `config` and write its outputs into `out_dir`:
///   density.csv, xcm.csv, xcm_variance.csv, sigma_r2.csv, sigma_r2_over_t.csv,
///   pair_correlation.csv, events.csv, rho.csv   (as selected by `outputs`)
///   *_stderr.csv companions when R > 1, and metadata.json.
RunOutcome run_experiment(const RunConfig& config, const std::filesystem::path& out_dir,
                          const RunContext& context = {});

/// A named bundle of runs reproducing one figure or oracle study. Each run
/// writes into its own subdirectory.
struct Preset {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, RunConfig>> runs;
};

const std::vector<std::string>& preset_names();

/// Throws ValidationError for an unknown name. `seed` and `realizations`
/// override the preset defaults when given.
Preset make_preset(const std::string& name, std::optional<std::uint64_t> seed = std::nullopt,
                   std::optional<std::size_t> realizations = std::nullopt);

/// Run every config of `preset` under `out_dir`/<preset>/<run>/ and write a
/// preset-level summary (fig4 adds the 2 D_c reference line).
std::vector<RunOutcome> run_preset(const Preset& preset, const std::filesystem::path& out_dir,
                                   const RunContext& context = {});

}  // namespace qmon
