#include "qmon/system.hpp"

#include <cmath>
#include <string>

#include "qmon/core.hpp"
#include "qmon/format.hpp"

namespace qmon {

std::string_view to_string(Statistics s) {
  switch (s) {
    case Statistics::Boson:
      return "boson";
    case Statistics::Fermion:
      return "fermion";
    case Statistics::Distinguishable:
      return "distinguishable";
  }
  return "unknown";
}

Statistics statistics_from_string(std::string_view name) {
  if (iequals(name, "boson") || iequals(name, "bosons")) return Statistics::Boson;
  if (iequals(name, "fermion") || iequals(name, "fermions")) return Statistics::Fermion;
  if (iequals(name, "distinguishable")) return Statistics::Distinguishable;
  throw ValidationError("statistics: unknown value '" + std::string(name) +
                        "' (expected boson, fermion or distinguishable)");
}

void SystemSpec::validate() const {
  if (sites < 1) throw ValidationError("sites: must be >= 1");
  if (particles < 1) throw ValidationError("particles: must be >= 1");
  if (statistics == Statistics::Fermion && particles > sites)
    throw ValidationError("particles: more fermions than sites");
  if (!std::isfinite(hopping)) throw ValidationError("hopping: must be finite");
  if (!std::isfinite(interaction)) throw ValidationError("interaction: must be finite");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ValidationError("gamma: must be >= 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma: must be > 0");
  if (!(lattice_constant > 0.0) || !std::isfinite(lattice_constant))
    throw ValidationError("lattice_constant: must be > 0");
  if (!std::isfinite(origin)) throw ValidationError("origin: must be finite");
}

void normalize(StateVector& state) {
  const double n = state.norm();
  if (!(n > 0.0)) throw DegenerateError("cannot normalize a zero state");
  state /= n;
}

}  // namespace qmon
