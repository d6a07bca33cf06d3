#include "qmon/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "qmon/basis.hpp"
#include "qmon/format.hpp"

namespace qmon {

namespace {

namespace pt = boost::property_tree;

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(const std::string& field, const std::string& text) {
  double value = 0.0;
  const auto s = trim(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ValidationError(field + ": expected a number, got '" + text + "'");
  return value;
}

template <class Int>
Int parse_int(const std::string& field, const std::string& text) {
  Int value = 0;
  const auto s = trim(text);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw ValidationError(field + ": expected an integer, got '" + text + "'");
  return value;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"system", {"sites", "particles", "statistics", "hopping", "interaction"}},
      {"measurement", {"Gamma", "gamma", "sigma", "d", "normalization_convention", "psf"}},
      {"run",
       {"unraveling", "initial_state", "initial_site", "t_end", "dt", "readout_points",
        "realizations", "base_seed", "outputs", "fit_window", "master_variant"}},
  };
  return keys;
}

std::string initial_name(const RunConfig& c) {
  switch (c.initial) {
    case InitialKind::AdjacentPair: return "adjacent_pair";
    case InitialKind::SingleSite: return "single_site";
    case InitialKind::File: return "file:" + c.initial_file;
  }
  return "?";
}

}  // namespace

std::string_view to_string(Unraveling u) {
  switch (u) {
    case Unraveling::Jump: return "Jump";
    case Unraveling::Diffusive: return "Diffusive";
    case Unraveling::MasterOnly: return "MasterOnly";
    case Unraveling::Unitary: return "Unitary";
  }
  return "?";
}

Unraveling unraveling_from_string(std::string_view name) {
  for (auto u : {Unraveling::Jump, Unraveling::Diffusive, Unraveling::MasterOnly, Unraveling::Unitary})
    if (iequals(to_string(u), name)) return u;
  throw ValidationError("unraveling: unknown value '" + std::string(name) +
                        "' (expected Jump, Diffusive, MasterOnly or Unitary)");
}

const std::vector<std::string>& known_outputs() {
  static const std::vector<std::string> names{"density", "xcm", "xcm_variance", "sigma_r2",
                                              "pair_correlation", "events", "rho"};
  return names;
}

RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  const auto& allowed = allowed_keys();
  for (const auto& [section, body] : tree) {
    const auto it = allowed.find(section);
    if (it == allowed.end() || body.empty())
      throw ValidationError(section + ": unknown section or key outside a section");
    for (const auto& [key, value] : body)
      if (!it->second.count(key)) throw ValidationError(section + "." + key + ": unknown key");
  }

  RunConfig c;
  c.base_dir = base_dir;
  auto get = [&](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return trim(*v);
    return std::nullopt;
  };

  if (auto v = get("system.sites"); v && *v != "auto") c.sites = parse_int<int>("system.sites", *v);
  if (auto v = get("system.particles")) c.particles = parse_int<int>("system.particles", *v);
  if (auto v = get("system.statistics")) {
    try {
      c.statistics = statistics_from_string(*v);
    } catch (const Error& e) {
      throw ValidationError(std::string("system.") + e.what());
    }
  }
  if (auto v = get("system.hopping")) c.hopping = parse_double("system.hopping", *v);
  if (auto v = get("system.interaction")) c.interaction = parse_double("system.interaction", *v);

  if (auto v = get("measurement.Gamma")) c.Gamma = parse_double("measurement.Gamma", *v);
  if (auto v = get("measurement.gamma")) c.gamma = parse_double("measurement.gamma", *v);
  if (auto v = get("measurement.sigma")) c.sigma = parse_double("measurement.sigma", *v);
  if (auto v = get("measurement.d")) c.d = parse_double("measurement.d", *v);
  if (auto v = get("measurement.normalization_convention")) {
    try {
      c.convention = rate_convention_from_string(*v);
    } catch (const Error& e) {
      throw ValidationError(std::string("measurement.") + e.what());
    }
  }
  if (auto v = get("measurement.psf")) c.psf = *v;

  if (auto v = get("run.unraveling")) {
    try {
      c.unraveling = unraveling_from_string(*v);
    } catch (const Error& e) {
      throw ValidationError(std::string("run.") + e.what());
    }
  }
  if (auto v = get("run.initial_state")) {
    if (*v == "adjacent_pair") {
      c.initial = InitialKind::AdjacentPair;
    } else if (*v == "single_site") {
      c.initial = InitialKind::SingleSite;
    } else if (v->rfind("file:", 0) == 0) {
      c.initial = InitialKind::File;
      c.initial_file = trim(v->substr(5));
    } else {
      throw ValidationError("run.initial_state: expected adjacent_pair, single_site or file:<path>");
    }
  }
  if (auto v = get("run.initial_site"); v && *v != "center")
    c.initial_site = parse_int<int>("run.initial_site", *v);
  if (auto v = get("run.t_end")) c.t_end = parse_double("run.t_end", *v);
  if (auto v = get("run.dt"); v && *v != "auto") c.dt = parse_double("run.dt", *v);
  if (auto v = get("run.readout_points"))
    c.readout_points = parse_int<std::size_t>("run.readout_points", *v);
  if (auto v = get("run.realizations")) c.realizations = parse_int<std::size_t>("run.realizations", *v);
  if (auto v = get("run.base_seed")) c.base_seed = parse_int<std::uint64_t>("run.base_seed", *v);
  if (auto v = get("run.outputs")) c.outputs = split_list(*v);
  if (auto v = get("run.fit_window")) {
    std::istringstream s(*v);
    std::string a, b, extra;
    if (!(s >> a >> b) || (s >> extra))
      throw ValidationError("run.fit_window: expected two numbers 'start end'");
    c.fit_window = FitWindow{parse_double("run.fit_window", a), parse_double("run.fit_window", b)};
  }
  if (auto v = get("run.master_variant")) {
    try {
      c.master_variant = master_variant_from_string(*v);
    } catch (const Error& e) {
      throw ValidationError(std::string("run.") + e.what());
    }
  }
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("config: cannot open " + path.string());
  return parse_config(in, path.parent_path());
}

std::string to_text(const RunConfig& c) {
  std::ostringstream out;
  out << "[system]\n";
  out << "sites = " << (c.sites ? std::to_string(*c.sites) : std::string("auto")) << "\n";
  out << "particles = " << c.particles << "\n";
  if (c.statistics) out << "statistics = " << to_string(*c.statistics) << "\n";
  out << "hopping = " << format_double(c.hopping) << "\n";
  out << "interaction = " << format_double(c.interaction) << "\n";
  out << "\n[measurement]\n";
  if (c.Gamma) out << "Gamma = " << format_double(*c.Gamma) << "\n";
  if (c.gamma) out << "gamma = " << format_double(*c.gamma) << "\n";
  if (c.sigma) out << "sigma = " << format_double(*c.sigma) << "\n";
  if (c.d) out << "d = " << format_double(*c.d) << "\n";
  out << "normalization_convention = " << to_string(c.convention) << "\n";
  out << "psf = " << c.psf << "\n";
  out << "\n[run]\n";
  out << "unraveling = " << to_string(c.unraveling) << "\n";
  out << "initial_state = " << initial_name(c) << "\n";
  out << "initial_site = " << (c.initial_site ? std::to_string(*c.initial_site) : std::string("center"))
      << "\n";
  out << "t_end = " << format_double(c.t_end) << "\n";
  out << "dt = " << (c.dt ? format_double(*c.dt) : std::string("auto")) << "\n";
  out << "readout_points = " << c.readout_points << "\n";
  out << "realizations = " << c.realizations << "\n";
  out << "base_seed = " << c.base_seed << "\n";
  out << "outputs = ";
  for (std::size_t k = 0; k < c.outputs.size(); ++k) out << (k ? ", " : "") << c.outputs[k];
  out << "\n";
  if (c.fit_window)
    out << "fit_window = " << format_double(c.fit_window->start) << " "
        << format_double(c.fit_window->end) << "\n";
  out << "master_variant = " << to_string(c.master_variant) << "\n";
  return out.str();
}

std::uint64_t config_hash(const RunConfig& config) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : to_text(config)) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

int initial_site(const RunConfig& c) {
  return c.initial_site ? *c.initial_site : (resolved_sites(c) - 1) / 2;
}

int resolved_sites(const RunConfig& c) {
  if (c.sites) return *c.sites;
  return 2 * static_cast<int>(std::ceil(2.0 * std::abs(c.hopping) * c.t_end - 1e-12)) + 9;
}

double measurement_strength(const RunConfig& c) {
  if (c.Gamma) return *c.Gamma;
  const double d = c.d.value_or(1.0);
  return c.gamma.value_or(0.0) * d * d / (c.sigma.value_or(1.0) * c.sigma.value_or(1.0));
}

SystemSpec system_spec(const RunConfig& c) {
  SystemSpec s;
  s.sites = resolved_sites(c);
  s.particles = c.particles;
  if (!c.statistics) throw ValidationError("system.statistics: missing");
  s.statistics = *c.statistics;
  s.hopping = c.hopping;
  s.interaction = c.interaction;
  if (c.Gamma) {
    s.gamma = *c.Gamma;
    s.sigma = 1.0;
    s.lattice_constant = 1.0;
  } else {
    s.gamma = c.gamma.value_or(0.0);
    s.sigma = c.sigma.value_or(1.0);
    s.lattice_constant = c.d.value_or(1.0);
  }
  s.origin = 0.5 * (s.sites - 1);
  return s;
}

void validate_config(const RunConfig& c) {
  if (!c.statistics) throw ValidationError("system.statistics: missing");
  if (c.Gamma && (c.gamma || c.sigma || c.d))
    throw ValidationError("measurement: Gamma and (gamma, sigma, d) are mutually exclusive");
  if (!c.Gamma && !c.gamma && c.unraveling != Unraveling::Unitary)
    throw ValidationError("measurement: give either Gamma or (gamma, sigma, d)");
  if (c.Gamma && !(*c.Gamma >= 0.0)) throw ValidationError("measurement.Gamma: must be >= 0");
  if (c.gamma && !(*c.gamma >= 0.0)) throw ValidationError("measurement.gamma: must be >= 0");
  if (c.sigma && !(*c.sigma > 0.0)) throw ValidationError("measurement.sigma: must be > 0");
  if (c.d && !(*c.d > 0.0)) throw ValidationError("measurement.d: must be > 0");
  if (c.unraveling == Unraveling::Jump && c.Gamma)
    throw ValidationError("measurement.Gamma: the Jump unraveling needs the (gamma, sigma, d) form");
  if (c.unraveling == Unraveling::MasterOnly && c.master_variant == MasterVariant::ExactOverlap && c.Gamma)
    throw ValidationError("measurement.Gamma: ExactOverlap needs the (gamma, sigma, d) form");
  if (c.psf != "gaussian" && c.unraveling != Unraveling::Jump &&
      !(c.unraveling == Unraveling::MasterOnly && c.master_variant == MasterVariant::ExactOverlap))
    throw ValidationError("measurement.psf: tabulated profiles are used by Jump and ExactOverlap only");
  if (!(c.t_end > 0.0) || !std::isfinite(c.t_end)) throw ValidationError("run.t_end: must be > 0");
  if (c.dt && !(*c.dt > 0.0)) throw ValidationError("run.dt: must be > 0");
  if (c.readout_points < 2) throw ValidationError("run.readout_points: must be >= 2");
  if (c.realizations < 1) throw ValidationError("run.realizations: must be >= 1");
  if (c.particles < 1) throw ValidationError("system.particles: must be >= 1");
  if (c.initial == InitialKind::AdjacentPair && c.particles != 2)
    throw ValidationError("run.initial_state: adjacent_pair needs particles = 2");
  if (c.initial == InitialKind::SingleSite && c.particles != 1)
    throw ValidationError("run.initial_state: single_site needs particles = 1");
  if (c.initial == InitialKind::File && c.initial_file.empty())
    throw ValidationError("run.initial_state: file path is empty");
  for (const auto& o : c.outputs) {
    const auto& names = known_outputs();
    if (std::find(names.begin(), names.end(), o) == names.end())
      throw ValidationError("run.outputs: unknown observable '" + o + "'");
  }
  if (c.fit_window && !(c.fit_window->end > c.fit_window->start))
    throw ValidationError("run.fit_window: end must exceed start");
  const int sites = resolved_sites(c);
  const auto spec = system_spec(c);
  if (c.initial != InitialKind::File) {
    const int needed = c.initial == InitialKind::AdjacentPair ? 2 : 1;
    const int first = initial_site(c);
    if (first < 0 || first + needed > sites) throw ValidationError("run.initial_site: outside the lattice");
  }
  spec.validate();
}

ValidationReport validate_report(const RunConfig& c) {
  ValidationReport r;
  try {
    validate_config(c);
  } catch (const Error& e) {
    r.ok = false;
    r.errors.push_back(e.what());
    return r;
  }
  const auto spec = system_spec(c);
  r.Gamma = measurement_strength(c);
  r.sites = spec.sites;
  r.basis_dimension = basis_dimension(spec.statistics, spec.sites, spec.particles);
  const double dim = static_cast<double>(r.basis_dimension);
  switch (c.unraveling) {
    case Unraveling::Diffusive:
      r.dt = c.dt.value_or(default_diffusive_dt(spec));
      r.memory_bytes = 4.0 * 16.0 * dim;
      break;
    case Unraveling::Jump: {
      const double rate = spec.gamma * spec.particles * spec.particles;
      r.dt = c.dt.value_or(0.01 * std::min(spec.hopping != 0.0 ? 1.0 / std::abs(spec.hopping) : 1.0,
                                           rate > 0.0 ? 1.0 / rate : 1.0));
      r.memory_bytes = 8.0 * 16.0 * dim;
      break;
    }
    case Unraveling::MasterOnly:
      r.dt = c.dt.value_or(0.0);
      r.memory_bytes = 6.0 * 16.0 * dim * dim;
      break;
    case Unraveling::Unitary:
      r.dt = c.dt.value_or(spec.hopping != 0.0 ? 0.0025 / std::abs(spec.hopping) : 1.0);
      r.memory_bytes = 6.0 * 16.0 * dim;
      break;
  }
  if (r.Gamma > 0.0) {
    r.diffusive_threshold = 4.0 / r.Gamma;
    if (spec.hopping != 0.0) r.collapse_time = analytic_collapse_time(spec.hopping, r.Gamma);
    if (r.collapse_time && c.t_end <= *r.collapse_time)
      r.regime = "collapse";
    else if (c.t_end <= *r.diffusive_threshold)
      r.regime = "inertial";
    else
      r.regime = "diffusive";
  } else {
    r.regime = "unitary";
  }
  if (c.unraveling == Unraveling::MasterOnly) {
    MasterSpec ms;
    ms.variant = c.master_variant;
    ms.system = spec;
    try {
      ms.validate();
      if (r.basis_dimension > kMasterDimensionCap)
        throw CapacityError("master equation dimension " + std::to_string(r.basis_dimension) +
                            " exceeds the cap of " + std::to_string(kMasterDimensionCap));
      if (!c.dt) r.dt = MasterEquation(ms).default_dt();
    } catch (const Error& e) {
      r.ok = false;
      r.errors.push_back(e.what());
    }
  }
  return r;
}

std::string format_report(const ValidationReport& r) {
  std::ostringstream out;
  if (!r.ok) {
    out << "status: invalid\n";
    for (const auto& e : r.errors) out << "error: " << e << "\n";
    return out.str();
  }
  out << "status: ok\n";
  out << "Gamma: " << format_double(r.Gamma) << "\n";
  out << "sites: " << r.sites << "\n";
  out << "dt: " << format_double(r.dt) << "\n";
  out << "basis_dimension: " << r.basis_dimension << "\n";
  out << "estimated_memory_bytes: " << format_double(r.memory_bytes) << "\n";
  if (r.collapse_time) out << "t_col: " << format_double(*r.collapse_time) << "\n";
  if (r.diffusive_threshold) out << "diffusive_threshold: t >> " << format_double(*r.diffusive_threshold) << "\n";
  out << "regime_at_t_end: " << r.regime << "\n";
  return out.str();
}

}  // namespace qmon
