#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "qmon/config.hpp"
#include "qmon/experiment.hpp"

namespace {

std::filesystem::path output_root(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("QMON_OUT_DIR"); env && *env) return env;
  return "qmon-out";
}

void print_files(const std::vector<qmon::RunOutcome>& outcomes) {
  for (const auto& o : outcomes)
    for (const auto& f : o.files) std::cout << f.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate continuously monitored lattice particles"};
  app.require_subcommand(1);
  app.set_version_flag("--version", qmon::kVersion);

  std::string config_path, out_dir, preset_name;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> realizations;

  auto* run = app.add_subcommand("run", "run a config file and write its outputs");
  run->add_option("config", config_path, "config file")->required();
  run->add_option("--out", out_dir, "output directory (default $QMON_OUT_DIR or ./qmon-out)");

  auto* validate = app.add_subcommand("validate", "check a config and report derived quantities");
  validate->add_option("config", config_path, "config file")->required();

  auto* preset = app.add_subcommand("preset", "run a built-in figure or oracle preset");
  preset->add_option("name", preset_name, "preset name")->required();
  preset->add_option("--seed", seed, "base seed");
  preset->add_option("--realizations", realizations, "number of trajectories");
  preset->add_option("--out", out_dir, "output directory (default $QMON_OUT_DIR or ./qmon-out)");

  auto* list = app.add_subcommand("presets", "list preset names");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*list) {
      for (const auto& name : qmon::preset_names())
        std::cout << name << "  " << qmon::make_preset(name).description << "\n";
      return 0;
    }
    if (*validate) {
      const auto report = qmon::validate_report(qmon::load_config(config_path));
      std::cout << qmon::format_report(report);
      return report.ok ? 0 : 1;
    }
    if (*run) {
      const auto config = qmon::load_config(config_path);
      const auto dir = output_root(out_dir) / std::filesystem::path(config_path).stem();
      const auto outcome = qmon::run_experiment(config, dir);
      print_files({outcome});
      if (!outcome.fit_error.empty()) std::cerr << "fit: " << outcome.fit_error << "\n";
      return 0;
    }
    if (*preset) {
      const auto p = qmon::make_preset(preset_name, seed, realizations);
      print_files(qmon::run_preset(p, output_root(out_dir)));
      return 0;
    }
  } catch (const qmon::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
