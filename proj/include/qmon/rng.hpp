#pragma once

#include <array>
#include <cstdint>

namespace qmon {

/// Philox4x32-10 block function (Salmon et al., SC'11): 128-bit counter,
/// 64-bit key, ten rounds.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                         std::array<std::uint32_t, 2> key);

/// Uniform double in the open interval (0, 1) from two 32-bit words
/// (52 significant bits, so the largest value stays below one).
double uniform_open(std::uint32_t hi, std::uint32_t lo);

/// Counter-based random stream keyed by (seed, stream).
///
/// Every draw is a pure function of (seed, stream, step, lane), so results do
/// not depend on the order in which trajectories or steps are evaluated. The
/// diffusive integrators address normals by (step, lane); the jump
/// integrator consumes a sequential cursor that lives in a separate counter
/// half and cannot collide with the addressed draws.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  /// Standard normal number `lane` of time step `step` (Box-Muller on one
  /// Philox block per pair of lanes).
  double normal(std::uint64_t step, std::uint32_t lane) const;

  /// Next uniform in (0, 1) from the sequential cursor.
  double next_uniform();

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t index, std::uint32_t tag) const;

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t cursor_ = 0;
};

}  // namespace qmon
