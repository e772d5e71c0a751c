#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fedmra {

// Purpose tags keep the random streams of different consumers disjoint.
enum class StreamTag : std::uint64_t {
  dataset = 1,
  test_split = 2,
  partition = 3,
  init = 4,
  batch_order = 5,
  info_batch_order = 6,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stream seed as a pure function of (seed, tag, indices...).
inline std::uint64_t derive_seed(std::uint64_t seed, StreamTag tag,
                                 std::initializer_list<std::uint64_t> indices = {}) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(tag)));
  for (auto i : indices) h = splitmix64(h ^ splitmix64(i + 0x632be59bd9b4e019ULL));
  return h;
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> indices = {}) {
  return Rng(derive_seed(seed, tag, indices));
}

}  // namespace fedmra
