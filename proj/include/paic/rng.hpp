#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace paic {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Substream derivation: state = seed, then for each path component c (in
// order) state = mix64(state ^ mix64(c + 1)). Paths used by the library:
//   (replication r, chain c)              -> MCMC chain of one replication
//   (cell k, replication r)               -> data draw of the normal study
//   (replication r, tag)                  -> tagged streams of the logit study
// Identical (seed, path) always gives the identical stream, independent of
// thread scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::initializer_list<std::uint64_t> path) {
  std::uint64_t state = seed;
  for (auto c : path) state = mix64(state ^ mix64(c + 1));
  return state;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(seed, path));
}

}  // namespace paic
