#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sni/dependency.hpp"
#include "sni/engine.hpp"
#include "sni/table.hpp"

namespace sni {

enum class SynthRegime { LinearGaussian, NonlinearMixed, InteractionXor };

std::string to_string(SynthRegime r);
SynthRegime regime_from_string(const std::string& s);

struct SynthSpec {
  SynthRegime regime = SynthRegime::LinearGaussian;
  int n = 1000;
  int d = 12;
  double edge_density = 0.2;
  double noise_sd = 0.5;
  uint64_t seed = 1;
};

struct SynthData {
  MixedTable table;
  GroundTruthGraph graph;
  int n_roots = 0;  // roots occupy feature indices [0, n_roots)
};

// Samples a sparse DAG with exogenous roots first (5 continuous, plus one
// binary root for the nonlinear/xor regimes) and children generated in
// topological order. interaction_xor children are pairs of parents combined
// by sign products or XOR with each parent's marginal |Pearson| verified
// < 0.15 at generation (bounded resampling).
SynthData generate(const SynthSpec& spec);

enum class SanityVariant { Sni, NoPrior, PriorOnly };

std::string to_string(SanityVariant v);

struct SanityRun {
  SanityVariant variant = SanityVariant::Sni;
  uint64_t seed = 0;
  RecoveryScores scores;
};

struct SanityAggregate {
  SanityVariant variant = SanityVariant::Sni;
  RecoveryScores mean;
  RecoveryScores sd;  // population SD over seeds
  int n_seeds = 0;
};

struct SanityReport {
  SynthRegime regime = SynthRegime::LinearGaussian;
  std::vector<SanityRun> runs;
  std::vector<SanityAggregate> aggregates;
};

// Per seed: generate -> inject strict MAR(rate) with roots as anchors ->
// fit the variant -> score dependency recovery against the ground truth.
// NoPrior disables the attention prior (alpha0 = 0, gamma regularizer off);
// PriorOnly assembles D directly from the correlation priors of X^(0).
SanityReport run_sanity(const SynthSpec& spec,
                        const std::vector<SanityVariant>& variants,
                        double rate, const std::vector<uint64_t>& seeds,
                        const SniConfig& base = SniConfig{});

// Default seed set for the sanity experiment.
std::vector<uint64_t> default_sanity_seeds();

}  // namespace sni
