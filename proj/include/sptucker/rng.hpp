#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace sptucker {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a list of tags
/// (mode, invocation, ...) with splitmix64 mixing.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(seed);
  for (auto t : tags) h = mix(h ^ mix(t));
  return h;
}

/// Uniform integer in [0, bound) by rejection; identical across standard libraries.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - Rng::max() % bound;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

/// Fisher-Yates shuffle built on uniform_below.
template <class T>
void portable_shuffle(std::vector<T>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace sptucker
