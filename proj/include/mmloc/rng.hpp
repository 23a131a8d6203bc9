#pragma once

// Seeded generators. Each trial owns several independent streams derived
// from a single 64-bit seed so that, e.g., changing the data constellation
// does not perturb the noise or geometry draws of the same trial.

#include <cstdint>
#include <random>

namespace mmloc {

using Rng = std::mt19937_64;

enum class Stream : std::uint64_t {
  Scene = 1,
  Channel = 2,
  Frame = 3,
  Noise = 4,
  Oracle = 5,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline Rng make_stream(std::uint64_t seed, Stream stream) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ (static_cast<std::uint64_t>(stream) * 0xD1B54A32D192ED03ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  return Rng(seq);
}

}  // namespace mmloc
