#pragma once

// Deterministic seed derivation. Every Monte-Carlo stream is a mt19937_64
// seeded from splitmix64(seed, tags...), so streams depend only on the
// scenario seed and the task coordinates, never on scheduling.

#include <cstdint>
#include <initializer_list>
#include <random>

namespace wcn {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}
  /// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace wcn
