#pragma once

#include <string>
#include <string_view>

namespace qmon {

enum class Statistics { Boson, Fermion, Distinguishable };

std::string_view to_string(Statistics s);
Statistics statistics_from_string(std::string_view name);

inline bool is_indistinguishable(Statistics s) { return s != Statistics::Distinguishable; }

/// Lattice geometry and physical parameters. Units: hbar = 1 always; the
/// lattice constant and hopping default to 1 and set the length and energy
/// scales of every derived rate.
struct SystemSpec {
  int sites = 1;
  int particles = 1;
  Statistics statistics = Statistics::Boson;
  double hopping = 1.0;       // J
  double interaction = 0.0;   // U
  double gamma = 0.0;         // signal rate in the measurement operator
  double sigma = 1.0;         // spatial resolution
  double lattice_constant = 1.0;
  // Site m sits at coordinate (m - origin) * lattice_constant. Internally all
  // sites are 0-based; the origin only shifts position-valued observables.
  double origin = 0.0;

  /// Dimensionless measurement strength gamma d^2 / sigma^2.
  double measurement_strength() const {
    return gamma * lattice_constant * lattice_constant / (sigma * sigma);
  }

  /// Position of site m in lattice units (origin applied).
  double coordinate(int site) const { return static_cast<double>(site) - origin; }

  /// Throws ValidationError naming the first offending field.
  void validate() const;
};

}  // namespace qmon
