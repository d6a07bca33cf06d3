#include "qmon/basis.hpp"

#include <limits>
#include <string>

#include "qmon/core.hpp"

namespace qmon {

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t saturating_mul(std::uint64_t a, std::uint64_t b) {
  if (a != 0 && b > kSaturated / a) return kSaturated;
  return a * b;
}

// C(n, k) by the multiplicative formula; each partial product is itself a
// binomial coefficient, so the division is exact.
std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  if (k > n - k) k = n - k;
  std::uint64_t result = 1;
  for (std::uint64_t i = 1; i <= k; ++i) {
    const std::uint64_t factor = n - k + i;
    if (result > kSaturated / factor) return kSaturated;
    result = result * factor / i;
  }
  return result;
}

void enumerate_occupations(int site, int remaining, int max_per_site, std::vector<int>& current,
                           std::vector<std::vector<int>>& out) {
  const int sites = static_cast<int>(current.size());
  if (site == sites - 1) {
    if (remaining <= max_per_site) {
      current[site] = remaining;
      out.push_back(current);
    }
    return;
  }
  for (int n = std::min(remaining, max_per_site); n >= 0; --n) {
    current[site] = n;
    enumerate_occupations(site + 1, remaining - n, max_per_site, current, out);
  }
  current[site] = 0;
}

}  // namespace

FockBasis::FockBasis(Statistics statistics, int sites, int particles,
                     std::vector<std::vector<int>> states)
    : statistics_(statistics), sites_(sites), particles_(particles), states_(std::move(states)) {
  occupations_.assign(states_.size() * static_cast<std::size_t>(sites_), 0);
  for (std::size_t k = 0; k < states_.size(); ++k) {
    const auto& s = states_[k];
    if (statistics_ == Statistics::Distinguishable) {
      for (int x : s) ++occupations_[k * sites_ + x];
    } else {
      for (int m = 0; m < sites_; ++m) occupations_[k * sites_ + m] = s[m];
    }
    index_.emplace(s, k);
  }
}

std::optional<std::size_t> FockBasis::index_of(const std::vector<int>& state) const {
  auto it = index_.find(state);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

int FockBasis::position(std::size_t k, int particle) const {
  if (statistics_ != Statistics::Distinguishable)
    throw StatisticsError("particle positions are only defined for distinguishable particles");
  if (particle < 0 || particle >= particles_)
    throw IndexError("particle index " + std::to_string(particle) + " out of range");
  return states_.at(k)[particle];
}

std::uint64_t basis_dimension(Statistics statistics, int sites, int particles) {
  const auto m = static_cast<std::uint64_t>(sites);
  const auto n = static_cast<std::uint64_t>(particles);
  switch (statistics) {
    case Statistics::Boson:
      return binomial(n + m - 1, n);
    case Statistics::Fermion:
      return binomial(m, n);
    case Statistics::Distinguishable: {
      std::uint64_t d = 1;
      for (std::uint64_t i = 0; i < n; ++i) d = saturating_mul(d, m);
      return d;
    }
  }
  return 0;
}

FockBasis enumerate_basis(const SystemSpec& spec, std::size_t cap) {
  spec.validate();
  const std::uint64_t dim = basis_dimension(spec.statistics, spec.sites, spec.particles);
  if (dim > cap) {
    throw CapacityError("basis dimension " +
                        (dim == kSaturated ? std::string("> 2^64") : std::to_string(dim)) +
                        " exceeds the cap of " + std::to_string(cap));
  }

  std::vector<std::vector<int>> states;
  states.reserve(static_cast<std::size_t>(dim));
  if (spec.statistics == Statistics::Distinguishable) {
    std::vector<int> tuple(spec.particles, 0);
    for (std::uint64_t k = 0; k < dim; ++k) {
      states.push_back(tuple);
      for (int i = spec.particles - 1; i >= 0; --i) {
        if (++tuple[i] < spec.sites) break;
        tuple[i] = 0;
      }
    }
  } else {
    const int max_per_site = spec.statistics == Statistics::Fermion ? 1 : spec.particles;
    std::vector<int> current(spec.sites, 0);
    enumerate_occupations(0, spec.particles, max_per_site, current, states);
  }
  return FockBasis(spec.statistics, spec.sites, spec.particles, std::move(states));
}

}  // namespace qmon
