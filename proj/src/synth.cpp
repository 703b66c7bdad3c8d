#include "sni/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>

#include "sni/baselines.hpp"
#include "sni/missingness.hpp"
#include "sni/prior.hpp"
#include "sni/rng.hpp"

namespace sni {

namespace {

constexpr double kXorMarginalBound = 0.15;
constexpr int kXorMaxAttempts = 100;
constexpr double kXorFlipProb = 0.05;

double pearson_pair(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Tercile cutpoints from the empirical distribution; index in {0, 1, 2}.
std::vector<int> discretize_terciles(const std::vector<double>& v) {
  std::vector<double> s = v;
  std::sort(s.begin(), s.end());
  const size_t n = s.size();
  const double q1 = s[n / 3];
  const double q2 = s[(2 * n) / 3];
  std::vector<int> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = v[i] < q1 ? 0 : (v[i] < q2 ? 1 : 2);
  return idx;
}

// Centered numeric code for a K-level category: {-1, +1} for K = 2,
// {-1, 0, +1} for K = 3.
double centered_code(int idx, int k) {
  return (2.0 * idx - (k - 1)) / static_cast<double>(k - 1);
}

std::vector<int> pick_parents(int child, double density, Rng& rng) {
  std::vector<int> parents;
  for (int p = 0; p < child; ++p)
    if (rng.uniform01() < density) parents.push_back(p);
  if (parents.empty()) parents.push_back(static_cast<int>(rng.below(child)));
  return parents;
}

double signed_weight(Rng& rng) {
  const double w = 0.5 + rng.uniform01();
  return rng.uniform01() < 0.5 ? -w : w;
}

// Features are named by kind with per-kind counters (x0, x1, ... and
// c0, c1, ...), so the binary root in the mixed regimes is c0.
struct FeatureNamer {
  int n_continuous = 0;
  int n_categorical = 0;

  Feature continuous() {
    return Feature{"x" + std::to_string(n_continuous++),
                   FeatureKind::Continuous,
                   {}};
  }
  Feature categorical(int k) {
    Feature f{"c" + std::to_string(n_categorical++),
              FeatureKind::Categorical,
              {}};
    for (int c = 0; c < k; ++c) f.categories.push_back("l" + std::to_string(c));
    return f;
  }
};

}  // namespace

std::string to_string(SynthRegime r) {
  switch (r) {
    case SynthRegime::LinearGaussian: return "linear_gaussian";
    case SynthRegime::NonlinearMixed: return "nonlinear_mixed";
    case SynthRegime::InteractionXor: return "interaction_xor";
  }
  throw std::logic_error("unknown regime");
}

SynthRegime regime_from_string(const std::string& s) {
  if (s == "linear_gaussian") return SynthRegime::LinearGaussian;
  if (s == "nonlinear_mixed") return SynthRegime::NonlinearMixed;
  if (s == "interaction_xor") return SynthRegime::InteractionXor;
  throw std::invalid_argument("unknown regime: " + s);
}

std::string to_string(SanityVariant v) {
  switch (v) {
    case SanityVariant::Sni: return "sni";
    case SanityVariant::NoPrior: return "no_prior";
    case SanityVariant::PriorOnly: return "prior_only";
  }
  throw std::logic_error("unknown variant");
}

SynthData generate(const SynthSpec& spec) {
  if (spec.n < 30) throw std::invalid_argument("generate: need n >= 30");
  if (spec.edge_density <= 0.0 || spec.edge_density > 1.0)
    throw std::invalid_argument("generate: edge_density must be in (0, 1]");
  if (spec.noise_sd < 0.0)
    throw std::invalid_argument("generate: noise_sd must be >= 0");

  const bool mixed = spec.regime != SynthRegime::LinearGaussian;
  const int n_roots = mixed ? 6 : 5;
  if (spec.d <= n_roots)
    throw std::invalid_argument("generate: d must exceed the root count (" +
                                std::to_string(n_roots) + ")");

  const int n = spec.n, d = spec.d;
  Rng rng(derive_stream(spec.seed, 0x67656eULL));  // decoupled from injector

  std::vector<std::vector<double>> num(d, std::vector<double>(n, 0.0));
  std::vector<std::vector<int>> cat(d);  // category indices where categorical
  std::vector<Feature> feats(d);
  FeatureNamer namer;
  Eigen::MatrixXi edges = Eigen::MatrixXi::Zero(d, d);

  // Exogenous roots: standard normal draws, plus one balanced binary root for
  // the mixed regimes.
  for (int j = 0; j < 5; ++j) {
    feats[j] = namer.continuous();
    for (int r = 0; r < n; ++r) num[j][r] = rng.normal();
  }
  if (mixed) {
    feats[5] = namer.categorical(2);
    cat[5].resize(n);
    for (int r = 0; r < n; ++r) {
      cat[5][r] = rng.uniform01() < 0.5 ? 0 : 1;
      num[5][r] = centered_code(cat[5][r], 2);
    }
  }

  for (int j = n_roots; j < d; ++j) {
    const int ordinal = j - n_roots;
    if (spec.regime == SynthRegime::LinearGaussian ||
        spec.regime == SynthRegime::NonlinearMixed) {
      const std::vector<int> parents = pick_parents(j, spec.edge_density, rng);
      std::vector<double> latent(n, 0.0);
      for (int p : parents) {
        edges(j, p) = 1;
        const double w = signed_weight(rng);
        int transform = 0;  // identity for the linear regime
        if (spec.regime == SynthRegime::NonlinearMixed)
          transform = 1 + static_cast<int>(rng.below(3));
        for (int r = 0; r < n; ++r) {
          const double x = num[p][r];
          double phi = x;
          if (transform == 1) phi = std::tanh(x);
          else if (transform == 2) phi = x * x - 1.0;
          else if (transform == 3) phi = x >= 0.0 ? 1.0 : -1.0;
          latent[r] += w * phi;
        }
      }
      for (int r = 0; r < n; ++r) latent[r] += spec.noise_sd * rng.normal();

      const bool discretize =
          spec.regime == SynthRegime::NonlinearMixed && ordinal % 3 == 2;
      if (discretize) {
        feats[j] = namer.categorical(3);
        cat[j] = discretize_terciles(latent);
        for (int r = 0; r < n; ++r) num[j][r] = centered_code(cat[j][r], 3);
      } else {
        feats[j] = namer.continuous();
        num[j] = latent;
      }
      continue;
    }

    // interaction_xor: two parents whose signs combine multiplicatively
    // (even ordinals) or by XOR of binarized values (odd ordinals); each
    // parent must stay marginally near-independent of the child.
    bool accepted = false;
    for (int attempt = 0; attempt < kXorMaxAttempts && !accepted; ++attempt) {
      int p1 = static_cast<int>(rng.below(j));
      int p2 = static_cast<int>(rng.below(j));
      while (p2 == p1) p2 = static_cast<int>(rng.below(j));
      if (p1 > p2) std::swap(p1, p2);

      const double m1 = median_of(num[p1]);
      const double m2 = median_of(num[p2]);
      std::vector<double> child_num(n);
      std::vector<int> child_cat;
      const bool xor_child = ordinal % 2 == 1;
      if (xor_child) {
        child_cat.resize(n);
        const double flip = spec.noise_sd > 0.0 ? kXorFlipProb : 0.0;
        for (int r = 0; r < n; ++r) {
          const bool b1 = num[p1][r] >= m1;
          const bool b2 = num[p2][r] >= m2;
          int lab = (b1 != b2) ? 1 : 0;
          if (flip > 0.0 && rng.uniform01() < flip) lab = 1 - lab;
          child_cat[r] = lab;
          child_num[r] = centered_code(lab, 2);
        }
      } else {
        const double w = 0.5 + rng.uniform01();
        for (int r = 0; r < n; ++r) {
          const double s1 = num[p1][r] >= m1 ? 1.0 : -1.0;
          const double s2 = num[p2][r] >= m2 ? 1.0 : -1.0;
          child_num[r] = w * s1 * s2 + spec.noise_sd * rng.normal();
        }
      }

      if (std::abs(pearson_pair(num[p1], child_num)) >= kXorMarginalBound ||
          std::abs(pearson_pair(num[p2], child_num)) >= kXorMarginalBound)
        continue;  // resample the pair and its draw

      edges.row(j).setZero();
      edges(j, p1) = 1;
      edges(j, p2) = 1;
      num[j] = child_num;
      if (xor_child) {
        feats[j] = namer.categorical(2);
        cat[j] = child_cat;
      } else {
        feats[j] = namer.continuous();
      }
      accepted = true;
    }
    if (!accepted)
      throw std::runtime_error(
          "generate: could not satisfy the marginal-correlation bound for "
          "feature " + std::to_string(j));
  }

  FeatureSchema schema{feats};
  schema.validate();
  MixedTable table(schema, n);
  for (int j = 0; j < d; ++j)
    for (int r = 0; r < n; ++r)
      table.set(r, j, feats[j].is_categorical() ? static_cast<double>(cat[j][r])
                                                : num[j][r]);

  return SynthData{std::move(table), GroundTruthGraph{edges}, n_roots};
}

namespace {

DependencyMatrix prior_only_dependency(const MixedTable& t,
                                       const SniConfig& base, uint64_t seed) {
  const int d = t.n_features();
  const std::vector<double> filled = mean_mode_fill(t);
  const auto stats = compute_standardizers(t);
  const CorrelationDesign design = build_correlation_design(t, filled, stats);
  const Partition part =
      partition_rows(t.n_rows(), base.partition_fractions, seed);
  AssociationMatrix assoc = pearson_corr(design, part.train);
  if (base.fisher) assoc = fisher_z(std::move(assoc));
  const Eigen::MatrixXd full = prior_matrix(assoc, design);

  DependencyMatrix dep;
  dep.d = Eigen::MatrixXd::Zero(d, d);
  dep.trained.assign(static_cast<size_t>(d), 0);
  for (int f : t.features_with_missing()) {
    dep.d.row(f) = full.row(f);
    dep.trained[static_cast<size_t>(f)] = 1;
  }
  return dep;
}

DependencyMatrix fit_variant(SanityVariant v, const MixedTable& t,
                             const SniConfig& base, uint64_t seed) {
  SniConfig cfg = base;
  cfg.seed = seed;
  switch (v) {
    case SanityVariant::Sni:
      return run(t, cfg).dependency;
    case SanityVariant::NoPrior:
      cfg.alpha0 = 0.0;
      cfg.cpfa.gamma_prior_enabled = false;
      return run(t, cfg).dependency;
    case SanityVariant::PriorOnly:
      return prior_only_dependency(t, cfg, seed);
  }
  throw std::logic_error("unknown variant");
}

void accumulate(RecoveryScores& acc, const RecoveryScores& s,
                const RecoveryScores& mean, bool squared) {
  auto add = [&](double RecoveryScores::*f) {
    if (squared) {
      const double dlt = s.*f - mean.*f;
      acc.*f += dlt * dlt;
    } else {
      acc.*f += s.*f;
    }
  };
  add(&RecoveryScores::auroc);
  add(&RecoveryScores::auprc);
  add(&RecoveryScores::precision_at_k);
  add(&RecoveryScores::recall_at_k);
  add(&RecoveryScores::hub_rho);
}

void scale(RecoveryScores& s, double c, bool sqrt_after) {
  auto app = [&](double RecoveryScores::*f) {
    s.*f *= c;
    if (sqrt_after) s.*f = std::sqrt(s.*f);
  };
  app(&RecoveryScores::auroc);
  app(&RecoveryScores::auprc);
  app(&RecoveryScores::precision_at_k);
  app(&RecoveryScores::recall_at_k);
  app(&RecoveryScores::hub_rho);
}

}  // namespace

std::vector<uint64_t> default_sanity_seeds() { return {1, 2, 3, 5, 8}; }

SanityReport run_sanity(const SynthSpec& spec,
                        const std::vector<SanityVariant>& variants,
                        double rate, const std::vector<uint64_t>& seeds,
                        const SniConfig& base) {
  if (variants.empty()) throw std::invalid_argument("run_sanity: no variants");
  if (seeds.empty()) throw std::invalid_argument("run_sanity: no seeds");

  SanityReport report;
  report.regime = spec.regime;
  for (uint64_t seed : seeds) {
    SynthSpec s = spec;
    s.seed = seed;
    const SynthData data = generate(s);

    InjectionSpec inj_spec;
    inj_spec.mechanism = Mechanism::MAR;
    inj_spec.rate = rate;
    inj_spec.seed = seed;
    for (int j = 0; j < data.n_roots; ++j) inj_spec.anchor_features.push_back(j);
    const InjectionResult inj = inject(data.table, inj_spec);

    for (SanityVariant v : variants) {
      const DependencyMatrix dep = fit_variant(v, inj.table, base, seed);
      report.runs.push_back(
          SanityRun{v, seed, score_recovery(dep, data.graph)});
    }
  }

  for (SanityVariant v : variants) {
    SanityAggregate agg;
    agg.variant = v;
    for (const SanityRun& r : report.runs)
      if (r.variant == v) {
        accumulate(agg.mean, r.scores, RecoveryScores{}, false);
        ++agg.n_seeds;
      }
    scale(agg.mean, 1.0 / agg.n_seeds, false);
    for (const SanityRun& r : report.runs)
      if (r.variant == v) accumulate(agg.sd, r.scores, agg.mean, true);
    scale(agg.sd, 1.0 / agg.n_seeds, true);
    report.aggregates.push_back(agg);
  }
  return report;
}

}  // namespace sni
