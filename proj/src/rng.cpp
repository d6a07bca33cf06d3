#include "qmon/rng.hpp"

#include <cmath>
#include <numbers>

namespace qmon {

namespace {

constexpr std::uint32_t kMulA = 0xD2511F53;
constexpr std::uint32_t kMulB = 0xCD9E8D57;
constexpr std::uint32_t kWeylA = 0x9E3779B9;
constexpr std::uint32_t kWeylB = 0xBB67AE85;

// Tags keep the addressed-normal and sequential-uniform counter spaces apart.
constexpr std::uint32_t kNormalTag = 0x0;
constexpr std::uint32_t kSequentialTag = 0x80000000u;

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                         std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

double uniform_open(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = (static_cast<std::uint64_t>(hi >> 6) << 26) | (lo >> 6);
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t index, std::uint32_t tag) const {
  // counter = (index lo, index hi, stream lo, stream hi ^ tag); key = seed.
  const std::array<std::uint32_t, 4> ctr{
      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
      static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32) ^ tag};
  const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                         static_cast<std::uint32_t>(seed_ >> 32)};
  return philox4x32(ctr, key);
}

double CounterRng::normal(std::uint64_t step, std::uint32_t lane) const {
  // Lanes 2j and 2j+1 share one block. The block index interleaves step and
  // lane pair; steps are limited to 2^48, lane pairs to 2^16.
  const std::uint64_t index = (step << 16) | (lane >> 1);
  const auto words = block(index, kNormalTag);
  const double u1 = uniform_open(words[0], words[1]);
  const double u2 = uniform_open(words[2], words[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return (lane & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
}

double CounterRng::next_uniform() {
  const auto words = block(cursor_++, kSequentialTag);
  return uniform_open(words[0], words[1]);
}

}  // namespace qmon
