#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sni/engine.hpp"
#include "sni/missingness.hpp"
#include "sni/synth.hpp"
#include "sni/table.hpp"

namespace sni {

using Json = nlohmann::json;

// Effective-config echo written into every artifact. Keys: heads,
// hidden_dims, embed_dim, lr, min_lr, batch, epochs, patience, weight_decay,
// rho, alpha0, gamma_decay, label_smoothing, focal_gamma, em_iters, tol,
// mask_aware, fisher, seed, threads.
Json config_to_json(const SniConfig& cfg);

// Overlays a config object onto `cfg`. Unknown keys are an error naming the
// key; values are type-checked.
void apply_config_json(SniConfig& cfg, const Json& j);

Json read_json_file(const std::string& path);
void write_json_file(const Json& j, const std::string& path);

// Full imputation report: config echo, convergence logs, dependency matrix,
// priors, and per-target training summaries.
Json imputation_report(const SniConfig& cfg, const ImputationResult& result);

// `explain` extractions from a persisted imputation report.
std::string dependency_csv_from_report(const Json& report);
Json edges_from_report(const Json& report);    // weight-descending edge list
Json lambdas_from_report(const Json& report);  // per-target head gates
std::string priors_csv_from_report(const Json& report);

Json sanity_json(const std::vector<SanityReport>& reports,
                 const SniConfig& base, double rate,
                 const std::vector<uint64_t>& seeds);

// Held-out evaluation of one imputed table, macro-averaged per feature kind.
// Continuous features need >= 2 held-out cells and a positive truth range;
// categorical features need >= 1. Fields are NaN when no feature qualifies.
struct EvalSummary {
  double nrmse = 0.0, mae = 0.0, mb = 0.0, r2 = 0.0, spearman = 0.0;
  int n_continuous = 0;
  double accuracy = 0.0, macro_f1 = 0.0, kappa = 0.0;
  int n_categorical = 0;
};

EvalSummary evaluate_imputation(const MixedTable& complete,
                                const MixedTable& imputed,
                                const std::vector<HeldOutCell>& truth);

struct BenchmarkSpec {
  std::vector<Mechanism> mechanisms;
  std::vector<double> rates;
  std::vector<std::string> methods;  // sni | meanmode | knn
  std::vector<uint64_t> seeds;
  SniConfig base;
  int knn_k = 5;
};

struct BenchmarkRow {
  std::string mechanism;
  double rate = 0.0;
  std::string method;
  uint64_t seed = 0;
  EvalSummary eval;
};

// Injects, imputes, and scores every (mechanism, rate, method, seed) cell on
// a complete input table.
std::vector<BenchmarkRow> run_benchmark(const MixedTable& complete,
                                        const BenchmarkSpec& spec);

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows);

// Mean +/- SD over seeds per (mechanism, rate, method).
Json benchmark_summary(const std::vector<BenchmarkRow>& rows);

std::string mechanism_name(Mechanism m);
Mechanism mechanism_from_string(const std::string& s);

}  // namespace sni
