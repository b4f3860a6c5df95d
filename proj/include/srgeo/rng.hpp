#pragma once

#include <cstdint>

namespace srgeo {

// Counter-based generator: every draw is a pure function of (seed, stream,
// counter), so parallel partitions of an index space produce identical
// values regardless of worker count.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ (0x9e3779b97f4a7c15ull * (stream + 1)))) {}

  std::uint64_t bits(std::uint64_t counter) const {
    return mix(key_ ^ (counter * 0xbf58476d1ce4e5b9ull + 0x94d049bb133111ebull));
  }

  // Uniform in [0,1).
  double uniform(std::uint64_t counter) const {
    return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
  }

  double uniform(std::uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

// Halton low-discrepancy sequence, used for deterministic solver starts.
inline double halton(std::uint64_t index, unsigned base) {
  double f = 1.0, r = 0.0;
  std::uint64_t i = index + 1;
  while (i > 0) {
    f /= base;
    r += f * static_cast<double>(i % base);
    i /= base;
  }
  return r;
}

}  // namespace srgeo
