#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sni/cpfa.hpp"
#include "sni/dependency.hpp"
#include "sni/prior.hpp"
#include "sni/rng.hpp"
#include "sni/table.hpp"

namespace sni {

constexpr int kMaxEmIters = 200;

struct SniConfig {
  double rho = 0.15;         // pseudo-mask rate
  double alpha0 = 1.0;       // initial prior strength
  double gamma_decay = 0.9;  // per-iteration decay of alpha
  int em_iters = 2;          // outer-loop cap G (hard cap kMaxEmIters)
  double tol = 1e-4;
  bool mask_aware = false;   // append observedness indicator tokens
  bool fisher = false;       // Fisher-z transform before prior aggregation
  CpfaConfig cpfa;
  std::array<double, 3> partition_fractions{0.70, 0.15, 0.15};
  uint64_t seed = 1;
  int threads = 1;

  void validate() const;
};

struct FeatureSummary {
  int target = 0;
  std::vector<double> lambdas;
  Eigen::MatrixXd head_means;  // H x (d-1), feature tokens only
  std::vector<EpochStats> history;
  std::vector<std::vector<double>> lambda_trajectory;
  int best_epoch = -1;
};

struct ImputationResult {
  MixedTable imputed;
  DependencyMatrix dependency;
  Eigen::MatrixXd priors;  // d x d, from the final iteration
  std::vector<FeatureSummary> features;
  std::vector<double> delta_log;  // one entry per completed iteration
  std::vector<double> alpha_log;
  int iterations = 0;
  Partition partition;
};

// Mean/mode fill of X^(0) (shared with the Mean/Mode baseline).
std::vector<double> initialize(const MixedTable& t);

// Bernoulli(rho) over the given rows, resampled until at least one row is
// masked and one is left unmasked. Requires >= 2 rows.
std::vector<uint8_t> pseudo_mask(const std::vector<int>& rows, double rho,
                                 Rng& rng);

// Relative Frobenius change between completed tables on the numeric
// representation: standardized continuous entries; a categorical cell
// contributes 1 when changed (and unit mass to the reference norm).
// Zero/zero -> 0; positive/zero -> +inf.
double convergence_delta(const MixedTable& t,
                         const std::vector<std::optional<StandardizerStats>>& stats,
                         const std::vector<double>& prev,
                         const std::vector<double>& next);

// CPFA input row block for one target: standardized/one-hot source features,
// plus one observedness indicator column per source when mask_aware is set.
struct FeatureInputs {
  Eigen::MatrixXd rows;  // n x input_width
  std::vector<TokenSpec> tokens;
  int feature_tokens = 0;
};

FeatureInputs build_feature_inputs(
    const MixedTable& t, const std::vector<double>& filled,
    const std::vector<std::optional<StandardizerStats>>& stats, int target,
    bool mask_aware);

ImputationResult run(const MixedTable& t, const SniConfig& config);

}  // namespace sni
