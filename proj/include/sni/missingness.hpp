#pragma once

#include <cstdint>
#include <vector>

#include "sni/table.hpp"

namespace sni {

enum class Mechanism { MCAR, MAR, MNAR };

struct InjectionSpec {
  Mechanism mechanism = Mechanism::MCAR;
  double rate = 0.3;
  uint64_t seed = 1;
  std::vector<int> anchor_features;  // kept fully observed
};

struct HeldOutCell {
  int row = 0;
  int feature = 0;
  double value = 0.0;  // category index for categorical features
};

struct InjectionResult {
  MixedTable table;
  std::vector<HeldOutCell> truth;
};

// Masks cells of a complete table. MCAR draws i.i.d. Bernoulli(rate) per
// non-anchor cell. MAR masks feature j with probability
// sigmoid(z_anchor + c); MNAR uses the cell's own standardized value (or a
// modal-vs-nonmodal indicator for categorical features). The intercept c is
// solved by bisection so the expected rate matches `rate` within 5e-3.
// Anchors are never masked.
InjectionResult inject(const MixedTable& t, const InjectionSpec& spec);

}  // namespace sni
