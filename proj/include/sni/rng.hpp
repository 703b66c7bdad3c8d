#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace sni {

// Deterministic random source. All variates are produced by explicit scaling
// of raw mt19937_64 output so that streams are reproducible across standard
// library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t raw() { return engine_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n). n must be positive.
  uint64_t below(uint64_t n);

  bool bernoulli(double p) { return uniform01() < p; }

  // Standard normal deviate (Marsaglia polar, one value cached).
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Mixes a base seed with up to two salts into an independent stream seed.
uint64_t derive_stream(uint64_t seed, uint64_t a, uint64_t b = 0);

}  // namespace sni
