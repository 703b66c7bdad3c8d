// Command-line front end: impute, inject, benchmark, sanity, explain.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sni/engine.hpp"
#include "sni/missingness.hpp"
#include "sni/report.hpp"
#include "sni/synth.hpp"
#include "sni/table.hpp"

namespace {

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << text;
}

sni::MixedTable load_table(const std::string& data_path,
                           const std::string& schema_path) {
  return sni::load_csv(data_path,
                       sni::FeatureSchema::from_json_file(schema_path));
}

struct CommonOpts {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
  bool deterministic = false;
};

void add_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config_path, "JSON config file");
  sub->add_option("--seed", o.seed, "RNG seed (overrides config)");
  sub->add_option("--threads", o.threads, "feature-training threads");
  sub->add_flag("--deterministic", o.deterministic,
                "force single-threaded execution");
}

sni::SniConfig effective_config(const CommonOpts& o, CLI::App* sub) {
  sni::SniConfig cfg;
  if (!o.config_path.empty())
    sni::apply_config_json(cfg, sni::read_json_file(o.config_path));
  if (sub->count("--seed") > 0) cfg.seed = o.seed;
  if (sub->count("--threads") > 0) cfg.threads = o.threads;
  if (o.deterministic) cfg.threads = 1;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Mixed-type tabular imputation with attention-based dependency "
      "diagnostics"};
  app.require_subcommand(1);

  // impute
  auto* imp = app.add_subcommand("impute", "impute a table with missing cells");
  std::string imp_data, imp_schema, imp_out, imp_report;
  bool imp_mask_aware = false;
  CommonOpts imp_common;
  imp->add_option("--data", imp_data, "input CSV")->required();
  imp->add_option("--schema", imp_schema, "schema JSON")->required();
  imp->add_option("--out", imp_out, "imputed CSV path")->required();
  imp->add_option("--report", imp_report, "report JSON path")->required();
  imp->add_flag("--mask-aware", imp_mask_aware,
                "append observedness indicator tokens");
  add_common(imp, imp_common);

  // inject
  auto* inj = app.add_subcommand("inject", "mask cells of a complete table");
  std::string inj_data, inj_schema, inj_mech, inj_out, inj_truth;
  double inj_rate = 0.3;
  uint64_t inj_seed = 1;
  std::vector<int> inj_anchors;
  inj->add_option("--data", inj_data, "complete input CSV")->required();
  inj->add_option("--schema", inj_schema, "schema JSON")->required();
  inj->add_option("--mechanism", inj_mech, "mcar|mar|mnar")->required();
  inj->add_option("--rate", inj_rate, "target missing rate");
  inj->add_option("--seed", inj_seed, "RNG seed");
  inj->add_option("--out", inj_out, "masked CSV path")->required();
  inj->add_option("--truth", inj_truth, "held-out cells JSON path")->required();
  inj->add_option("--anchors", inj_anchors,
                  "anchor feature indices (kept observed; default 0 for mar)")
      ->delimiter(',');

  // benchmark
  auto* ben = app.add_subcommand("benchmark",
                                 "inject/impute/score a method grid");
  std::string ben_data, ben_schema, ben_out, ben_summary;
  std::vector<std::string> ben_mechs{"mcar"};
  std::vector<double> ben_rates{0.3};
  std::vector<std::string> ben_methods{"sni", "meanmode", "knn"};
  std::vector<uint64_t> ben_seeds{1, 2, 3, 5, 8};
  CommonOpts ben_common;
  ben->add_option("--data", ben_data, "complete input CSV")->required();
  ben->add_option("--schema", ben_schema, "schema JSON")->required();
  ben->add_option("--mechanisms", ben_mechs, "comma list: mcar,mar,mnar")
      ->delimiter(',');
  ben->add_option("--rates", ben_rates, "comma list of missing rates")
      ->delimiter(',');
  ben->add_option("--methods", ben_methods, "comma list: sni,meanmode,knn")
      ->delimiter(',');
  ben->add_option("--seeds", ben_seeds, "comma list of seeds")->delimiter(',');
  ben->add_option("--out", ben_out, "results CSV path")->required();
  ben->add_option("--summary", ben_summary, "summary JSON path (mean/SD)");
  add_common(ben, ben_common);

  // sanity
  auto* san = app.add_subcommand(
      "sanity", "dependency-recovery experiment on synthetic graphs");
  std::string san_regime = "all", san_out;
  std::vector<uint64_t> san_seeds{1, 2, 3, 5, 8};
  double san_rate = 0.3;
  int san_n = 1000, san_d = 12;
  CommonOpts san_common;
  san->add_option("--regime", san_regime,
                  "linear_gaussian|nonlinear_mixed|interaction_xor|all");
  san->add_option("--seeds", san_seeds, "comma list of seeds")->delimiter(',');
  san->add_option("--rate", san_rate, "injected missing rate");
  san->add_option("--n", san_n, "rows per dataset");
  san->add_option("--d", san_d, "features per dataset");
  san->add_option("--out", san_out, "report JSON path")->required();
  add_common(san, san_common);

  // explain
  auto* exp = app.add_subcommand("explain",
                                 "extract diagnostics from a report JSON");
  std::string exp_report, exp_dep, exp_edges, exp_lambdas, exp_priors;
  exp->add_option("--report", exp_report, "imputation report JSON")->required();
  exp->add_option("--out-depmatrix", exp_dep, "dependency matrix CSV path");
  exp->add_option("--out-edges", exp_edges, "ranked edge list JSON path");
  exp->add_option("--out-lambdas", exp_lambdas, "head-gate JSON path");
  exp->add_option("--out-priors", exp_priors, "prior matrix CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(imp)) {
      sni::SniConfig cfg = effective_config(imp_common, imp);
      if (imp_mask_aware) cfg.mask_aware = true;
      const sni::MixedTable table = load_table(imp_data, imp_schema);
      const sni::ImputationResult result = sni::run(table, cfg);
      sni::write_csv(result.imputed, imp_out);
      sni::write_json_file(sni::imputation_report(cfg, result), imp_report);
    } else if (app.got_subcommand(inj)) {
      const sni::MixedTable table = load_table(inj_data, inj_schema);
      sni::InjectionSpec spec;
      spec.mechanism = sni::mechanism_from_string(inj_mech);
      spec.rate = inj_rate;
      spec.seed = inj_seed;
      spec.anchor_features = inj_anchors;
      if (spec.mechanism == sni::Mechanism::MAR &&
          spec.anchor_features.empty())
        spec.anchor_features = {0};
      const sni::InjectionResult result = sni::inject(table, spec);
      sni::write_csv(result.table, inj_out);
      sni::Json truth = sni::Json::array();
      for (const sni::HeldOutCell& c : result.truth)
        truth.push_back({{"row", c.row},
                         {"feature", c.feature},
                         {"name", table.schema().at(c.feature).name},
                         {"value", c.value}});
      sni::write_json_file(truth, inj_truth);
    } else if (app.got_subcommand(ben)) {
      const sni::MixedTable table = load_table(ben_data, ben_schema);
      sni::BenchmarkSpec spec;
      for (const std::string& m : ben_mechs)
        spec.mechanisms.push_back(sni::mechanism_from_string(m));
      spec.rates = ben_rates;
      spec.methods = ben_methods;
      spec.seeds = ben_seeds;
      spec.base = effective_config(ben_common, ben);
      const std::vector<sni::BenchmarkRow> rows =
          sni::run_benchmark(table, spec);
      write_text_file(ben_out, sni::benchmark_csv(rows));
      if (!ben_summary.empty())
        sni::write_json_file(sni::benchmark_summary(rows), ben_summary);
    } else if (app.got_subcommand(san)) {
      std::vector<sni::SynthRegime> regimes;
      if (san_regime == "all")
        regimes = {sni::SynthRegime::LinearGaussian,
                   sni::SynthRegime::NonlinearMixed,
                   sni::SynthRegime::InteractionXor};
      else
        regimes = {sni::regime_from_string(san_regime)};
      const sni::SniConfig base = effective_config(san_common, san);
      const std::vector<sni::SanityVariant> variants{
          sni::SanityVariant::Sni, sni::SanityVariant::NoPrior,
          sni::SanityVariant::PriorOnly};
      std::vector<sni::SanityReport> reports;
      for (sni::SynthRegime r : regimes) {
        sni::SynthSpec spec;
        spec.regime = r;
        spec.n = san_n;
        spec.d = san_d;
        reports.push_back(
            sni::run_sanity(spec, variants, san_rate, san_seeds, base));
      }
      sni::write_json_file(sni::sanity_json(reports, base, san_rate, san_seeds),
                           san_out);
    } else if (app.got_subcommand(exp)) {
      if (exp_dep.empty() && exp_edges.empty() && exp_lambdas.empty() &&
          exp_priors.empty()) {
        std::cerr << "explain: need at least one of --out-depmatrix, "
                     "--out-edges, --out-lambdas, --out-priors\n";
        return 2;
      }
      const sni::Json report = sni::read_json_file(exp_report);
      if (!exp_dep.empty())
        write_text_file(exp_dep, sni::dependency_csv_from_report(report));
      if (!exp_edges.empty())
        sni::write_json_file(sni::edges_from_report(report), exp_edges);
      if (!exp_lambdas.empty())
        sni::write_json_file(sni::lambdas_from_report(report), exp_lambdas);
      if (!exp_priors.empty())
        write_text_file(exp_priors, sni::priors_csv_from_report(report));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
