#include "sni/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace sni {

uint64_t Rng::below(uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform01() - 1.0;
    v = 2.0 * uniform01() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  cached_ = v * m;
  has_cached_ = true;
  return u * m;
}

uint64_t derive_stream(uint64_t seed, uint64_t a, uint64_t b) {
  // splitmix64 finalizer applied over the combined words
  uint64_t z = seed;
  for (uint64_t w : {a + 0x9E3779B97F4A7C15ULL, b + 0xBF58476D1CE4E5B9ULL}) {
    z += w;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
  }
  return z;
}

}  // namespace sni
