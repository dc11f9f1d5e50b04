// Deterministic random streams keyed by (seed, stream, trial). Each key
// yields an independent std::mt19937_64, so Monte Carlo trials can run in any
// order or in parallel and still reproduce bit for bit.
#pragma once

#include <cstdint>
#include <random>

namespace ipfnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

enum class Stream : std::uint64_t {
  Truth = 1,
  Base = 2,
  Sparsity = 3,
  Positions = 4,
  Noise = 5,
  Factors = 6,
};

inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t trial = 0) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(stream));
  h = splitmix64(h ^ trial);
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace ipfnet
