// Deterministic PRNG. Every random choice in the library flows through Rng so
// that identical seeds give bit-identical results on any platform; the std
// distributions are avoided because their output is implementation-defined.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <vector>

namespace mxlink {

constexpr uint64_t fnv1a64(const char* s, uint64_t h = 0xcbf29ce484222325ULL) {
  return *s ? fnv1a64(s + 1, (h ^ static_cast<uint8_t>(*s)) * 0x100000001b3ULL)
            : h;
}

inline uint64_t fnv1a64_bytes(const void* data, size_t n,
                              uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const uint8_t*>(data);
  for (size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 0x100000001b3ULL;
  return h;
}

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// xoshiro256++ seeded through splitmix64.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  /// Stable named substream: fold a path of tags into the seed. Used to give
  /// independent deterministic streams to shuffling, init, dropout, walks...
  static Rng stream(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t sm = seed;
    uint64_t h = splitmix64(sm);
    for (uint64_t t : path) {
      sm = h ^ (t * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL);
      h = splitmix64(sm);
    }
    return Rng(h);
  }

  uint64_t next() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling keeps it exactly uniform.
  uint64_t below(uint64_t n) {
    const uint64_t limit = ~uint64_t{0} - ~uint64_t{0} % n;
    uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  /// Box-Muller. No cached spare: two uniforms per draw, trivially stateless.
  double normal(double mean = 0.0, double stddev = 1.0) {
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * M_PI * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace mxlink
