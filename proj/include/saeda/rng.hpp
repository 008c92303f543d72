#pragma once
// Deterministic randomness. Everything that draws random numbers goes
// through this header so that a (seed, purpose, index) triple always yields
// the same bits on every platform and for every thread count.
//
// Two deliberate choices:
//   * std::mt19937_64 supplies raw 64-bit draws, but the *distributions*
//     (uniform double, normal, bounded int, shuffle) are hand-rolled here:
//     the standard distribution objects are implementation-defined, which
//     would silently break the bit-identical-regeneration contract.
//   * independent random streams are derived with SplitMix64 over the base
//     seed, a purpose tag and an index (a splittable counter scheme), so
//     per-sample / per-epoch / per-layer streams never depend on how work
//     is ordered or parallelized.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace saeda::rng {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a over a short literal; used to name stream purposes ("latents",
// "stage1-shuffle", ...). constexpr so tags are compile-time constants.
constexpr uint64_t tag(const char* s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (; *s; ++s) h = (h ^ (uint64_t)(unsigned char)*s) * 0x100000001b3ULL;
  return h;
}

// Stream id for (base seed, purpose, index). Chaining two mix rounds keeps
// related indices statistically independent.
inline uint64_t derive(uint64_t seed, uint64_t purpose, uint64_t index = 0) {
  return splitmix64(splitmix64(seed ^ purpose) + index);
}

class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t bits() { return gen_(); }

  // uniform in [0, 1): top 53 bits of a raw draw.
  double uniform() { return (double)(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // uniform integer in [0, n) via 128-bit multiply-shift (fixed algorithm,
  // negligible bias for the n used here).
  int below(int n) {
    return (int)(((__uint128_t)gen_() * (uint64_t)n) >> 64);
  }

  // Fisher-Yates with our own below(); std::shuffle is not portable.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (int i = (int)v.size() - 1; i > 0; --i) {
      int j = below(i + 1);
      std::swap(v[i], v[j]);
    }
  }

private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

// Glorot/fan-based uniform init: w ~ U(-a, a), a = sqrt(6 / (fan_in + fan_out)).
inline void glorot_uniform(Rng& r, int fan_in, int fan_out, float* w, size_t count) {
  double a = std::sqrt(6.0 / (double)(fan_in + fan_out));
  for (size_t i = 0; i < count; ++i) w[i] = (float)r.uniform(-a, a);
}

} // namespace saeda::rng
