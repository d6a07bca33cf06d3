#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qmon/system.hpp"

namespace qmon {

inline constexpr std::size_t kDefaultBasisCap = 1'000'000;

/// Enumerated N-particle basis on an open chain.
///
/// Boson and fermion states are occupation vectors {n_m} ordered
/// lexicographically from the largest vector down, so (1,0) precedes (0,1).
/// Distinguishable states are position tuples (x_0, ..., x_{N-1}) in
/// ascending lexicographic order; the row index is the base-M number with
/// particle 0 as the most significant digit.
class FockBasis {
 public:
  FockBasis(Statistics statistics, int sites, int particles,
            std::vector<std::vector<int>> states);

  Statistics statistics() const { return statistics_; }
  int sites() const { return sites_; }
  int particles() const { return particles_; }
  std::size_t dimension() const { return states_.size(); }

  /// Occupation vector (indistinguishable) or position tuple (distinguishable).
  const std::vector<int>& state(std::size_t k) const { return states_.at(k); }
  const std::vector<std::vector<int>>& states() const { return states_; }

  std::optional<std::size_t> index_of(const std::vector<int>& state) const;

  /// Number of particles on `site` in basis state k, for any statistics.
  int occupation(std::size_t k, int site) const {
    return occupations_[k * static_cast<std::size_t>(sites_) + static_cast<std::size_t>(site)];
  }
  std::span<const int> occupations(std::size_t k) const {
    return {occupations_.data() + k * static_cast<std::size_t>(sites_),
            static_cast<std::size_t>(sites_)};
  }

  /// Position of particle i in basis state k. Distinguishable bases only.
  int position(std::size_t k, int particle) const;

 private:
  Statistics statistics_;
  int sites_;
  int particles_;
  std::vector<std::vector<int>> states_;
  std::vector<int> occupations_;
  std::map<std::vector<int>, std::size_t> index_;
};

/// Closed-form dimension; saturates at UINT64_MAX instead of overflowing.
std::uint64_t basis_dimension(Statistics statistics, int sites, int particles);

/// Throws CapacityError if the basis would exceed `cap` states.
FockBasis enumerate_basis(const SystemSpec& spec, std::size_t cap = kDefaultBasisCap);

}  // namespace qmon
