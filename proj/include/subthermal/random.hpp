#pragma once

#include <cstdint>
#include <random>

namespace subthermal {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; maps (seed, stream index) to well-separated seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng substream(std::uint64_t seed, std::uint64_t stream) { return Rng(mix_seed(seed, stream)); }

/// Uniform on [0, 1) with 53 random bits; identical across standard libraries.
inline double uniform01(Rng& rng) { return double(rng() >> 11) * 0x1.0p-53; }

}  // namespace subthermal
