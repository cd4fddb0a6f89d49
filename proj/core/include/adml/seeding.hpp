#pragma once

#include <bit>
#include <cstdint>

namespace adml {

// SplitMix64 finalizer (Steele, Lea & Flood). Used both as a hash and to
// derive independent per-task seeds from a master seed.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Seed for stream `index` of `master`. Stream r never depends on how many
// other streams exist.
constexpr std::uint64_t split_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t hash_combine(std::uint64_t h, double value) noexcept {
  // +0.0 and -0.0 hash identically.
  const double v = value == 0.0 ? 0.0 : value;
  return mix64(h ^ std::bit_cast<std::uint64_t>(v));
}

}  // namespace adml
