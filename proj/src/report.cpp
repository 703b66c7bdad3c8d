#include "sni/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "sni/baselines.hpp"
#include "sni/metrics.hpp"

namespace sni {

namespace {

Json matrix_to_json(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

double number_at(const Json& j, const std::string& key) {
  if (!j.at(key).is_number())
    throw std::invalid_argument("config key '" + key + "' must be a number");
  return j.at(key).get<double>();
}

int int_at(const Json& j, const std::string& key) {
  if (!j.at(key).is_number_integer())
    throw std::invalid_argument("config key '" + key + "' must be an integer");
  return j.at(key).get<int>();
}

bool bool_at(const Json& j, const std::string& key) {
  if (!j.at(key).is_boolean())
    throw std::invalid_argument("config key '" + key + "' must be a boolean");
  return j.at(key).get<bool>();
}

}  // namespace

Json config_to_json(const SniConfig& cfg) {
  Json j;
  j["heads"] = cfg.cpfa.heads;
  j["hidden_dims"] = cfg.cpfa.hidden_dims;
  j["embed_dim"] = cfg.cpfa.embed_dim;
  j["lr"] = cfg.cpfa.lr;
  j["min_lr"] = cfg.cpfa.min_lr;
  j["batch"] = cfg.cpfa.batch;
  j["epochs"] = cfg.cpfa.max_epochs;
  j["patience"] = cfg.cpfa.patience;
  j["weight_decay"] = cfg.cpfa.weight_decay;
  j["label_smoothing"] = cfg.cpfa.label_smoothing;
  j["focal_gamma"] = cfg.cpfa.focal_gamma;
  j["gamma_prior"] = cfg.cpfa.gamma_prior_enabled;
  j["rho"] = cfg.rho;
  j["alpha0"] = cfg.alpha0;
  j["gamma_decay"] = cfg.gamma_decay;
  j["em_iters"] = cfg.em_iters;
  j["tol"] = cfg.tol;
  j["mask_aware"] = cfg.mask_aware;
  j["fisher"] = cfg.fisher;
  j["seed"] = cfg.seed;
  j["threads"] = cfg.threads;
  return j;
}

void apply_config_json(SniConfig& cfg, const Json& j) {
  if (!j.is_object()) throw std::invalid_argument("config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "heads") cfg.cpfa.heads = int_at(j, key);
    else if (key == "hidden_dims") {
      if (!value.is_array())
        throw std::invalid_argument("config key 'hidden_dims' must be an array");
      cfg.cpfa.hidden_dims = value.get<std::vector<int>>();
    } else if (key == "embed_dim") cfg.cpfa.embed_dim = int_at(j, key);
    else if (key == "lr") cfg.cpfa.lr = number_at(j, key);
    else if (key == "min_lr") cfg.cpfa.min_lr = number_at(j, key);
    else if (key == "batch") cfg.cpfa.batch = int_at(j, key);
    else if (key == "epochs") cfg.cpfa.max_epochs = int_at(j, key);
    else if (key == "patience") cfg.cpfa.patience = int_at(j, key);
    else if (key == "weight_decay") cfg.cpfa.weight_decay = number_at(j, key);
    else if (key == "label_smoothing")
      cfg.cpfa.label_smoothing = number_at(j, key);
    else if (key == "focal_gamma") cfg.cpfa.focal_gamma = number_at(j, key);
    else if (key == "gamma_prior")
      cfg.cpfa.gamma_prior_enabled = bool_at(j, key);
    else if (key == "rho") cfg.rho = number_at(j, key);
    else if (key == "alpha0") cfg.alpha0 = number_at(j, key);
    else if (key == "gamma_decay") cfg.gamma_decay = number_at(j, key);
    else if (key == "em_iters") cfg.em_iters = int_at(j, key);
    else if (key == "tol") cfg.tol = number_at(j, key);
    else if (key == "mask_aware") cfg.mask_aware = bool_at(j, key);
    else if (key == "fisher") cfg.fisher = bool_at(j, key);
    else if (key == "seed") cfg.seed = j.at(key).get<uint64_t>();
    else if (key == "threads") cfg.threads = int_at(j, key);
    else throw std::invalid_argument("unknown config key '" + key + "'");
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  Json j;
  try {
    in >> j;
  } catch (const Json::parse_error& e) {
    throw std::runtime_error("invalid JSON in " + path + ": " + e.what());
  }
  return j;
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << j.dump(2) << '\n';
}

Json imputation_report(const SniConfig& cfg, const ImputationResult& result) {
  const FeatureSchema& schema = result.imputed.schema();
  Json j;
  j["config"] = config_to_json(cfg);
  Json names = Json::array();
  for (const Feature& f : schema.features) names.push_back(f.name);
  j["feature_names"] = names;
  j["n_rows"] = result.imputed.n_rows();
  j["iterations"] = result.iterations;
  j["delta_log"] = result.delta_log;
  j["alpha_log"] = result.alpha_log;
  j["partition"] = {{"train", result.partition.train.size()},
                    {"validation", result.partition.validation.size()},
                    {"test", result.partition.test.size()}};
  j["dependency"] = {{"matrix", matrix_to_json(result.dependency.d)},
                     {"trained", result.dependency.trained}};
  j["priors"] = matrix_to_json(result.priors);

  Json feats = Json::array();
  for (const FeatureSummary& s : result.features) {
    Json f;
    f["target"] = s.target;
    f["name"] = schema.at(s.target).name;
    f["lambdas"] = s.lambdas;
    f["best_epoch"] = s.best_epoch;
    f["head_means"] = matrix_to_json(s.head_means);
    f["lambda_trajectory"] = s.lambda_trajectory;
    Json hist = Json::array();
    for (const EpochStats& e : s.history)
      hist.push_back({{"recon", e.train.recon},
                      {"prior", e.train.prior},
                      {"gamma_reg", e.train.gamma_reg},
                      {"total", e.train.total},
                      {"val_recon", e.val_recon},
                      {"lr", e.lr}});
    f["history"] = std::move(hist);
    feats.push_back(std::move(f));
  }
  j["features"] = std::move(feats);
  return j;
}

namespace {

std::string named_matrix_csv(const Json& names, const Json& matrix,
                             const char* corner) {
  std::ostringstream out;
  out << corner;
  for (const auto& n : names) out << ',' << n.get<std::string>();
  out << '\n';
  for (size_t r = 0; r < matrix.size(); ++r) {
    out << names.at(r).get<std::string>();
    for (const auto& v : matrix.at(r))
      out << ',' << format_double(v.get<double>());
    out << '\n';
  }
  return out.str();
}

}  // namespace

std::string dependency_csv_from_report(const Json& report) {
  return named_matrix_csv(report.at("feature_names"),
                          report.at("dependency").at("matrix"), "target");
}

std::string priors_csv_from_report(const Json& report) {
  return named_matrix_csv(report.at("feature_names"), report.at("priors"),
                          "target");
}

Json edges_from_report(const Json& report) {
  const Json& names = report.at("feature_names");
  const Json& dep = report.at("dependency");
  const Json& matrix = dep.at("matrix");
  const std::vector<int> trained = dep.at("trained").get<std::vector<int>>();

  struct Edge {
    int target, source;
    double weight;
  };
  std::vector<Edge> edges;
  for (size_t t = 0; t < matrix.size(); ++t) {
    if (!trained.at(t)) continue;
    for (size_t s = 0; s < matrix.at(t).size(); ++s) {
      if (s == t) continue;
      edges.push_back(
          {static_cast<int>(t), static_cast<int>(s),
           matrix.at(t).at(s).get<double>()});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    if (a.weight != b.weight) return a.weight > b.weight;
    if (a.target != b.target) return a.target < b.target;
    return a.source < b.source;
  });

  Json out = Json::array();
  for (const Edge& e : edges)
    out.push_back({{"target", names.at(e.target).get<std::string>()},
                   {"source", names.at(e.source).get<std::string>()},
                   {"weight", e.weight}});
  return out;
}

Json lambdas_from_report(const Json& report) {
  Json out = Json::array();
  for (const auto& f : report.at("features"))
    out.push_back({{"name", f.at("name")}, {"lambdas", f.at("lambdas")}});
  return out;
}

namespace {

Json scores_to_json(const RecoveryScores& s) {
  return {{"auroc", s.auroc},
          {"auprc", s.auprc},
          {"precision_at_k", s.precision_at_k},
          {"recall_at_k", s.recall_at_k},
          {"hub_rho", s.hub_rho}};
}

}  // namespace

Json sanity_json(const std::vector<SanityReport>& reports,
                 const SniConfig& base, double rate,
                 const std::vector<uint64_t>& seeds) {
  Json j;
  j["config"] = config_to_json(base);
  j["rate"] = rate;
  j["seeds"] = seeds;
  Json regs = Json::array();
  for (const SanityReport& rep : reports) {
    Json r;
    r["regime"] = to_string(rep.regime);
    Json runs = Json::array();
    for (const SanityRun& run : rep.runs) {
      Json e = scores_to_json(run.scores);
      e["variant"] = to_string(run.variant);
      e["seed"] = run.seed;
      runs.push_back(std::move(e));
    }
    r["runs"] = std::move(runs);
    Json aggs = Json::array();
    for (const SanityAggregate& a : rep.aggregates)
      aggs.push_back({{"variant", to_string(a.variant)},
                      {"n_seeds", a.n_seeds},
                      {"mean", scores_to_json(a.mean)},
                      {"sd", scores_to_json(a.sd)}});
    r["aggregates"] = std::move(aggs);
    regs.push_back(std::move(r));
  }
  j["reports"] = std::move(regs);
  return j;
}

EvalSummary evaluate_imputation(const MixedTable& complete,
                                const MixedTable& imputed,
                                const std::vector<HeldOutCell>& truth) {
  if (complete.n_rows() != imputed.n_rows() ||
      complete.n_features() != imputed.n_features())
    throw std::invalid_argument("evaluate_imputation: shape mismatch");
  const FeatureSchema& schema = complete.schema();
  const int d = schema.size();

  std::vector<std::vector<double>> truth_by_f(d), pred_by_f(d);
  for (const HeldOutCell& c : truth) {
    truth_by_f[c.feature].push_back(c.value);
    pred_by_f[c.feature].push_back(imputed.get(c.row, c.feature));
  }

  EvalSummary out;
  for (int j = 0; j < d; ++j) {
    if (truth_by_f[j].empty()) continue;
    if (schema.at(j).is_categorical()) {
      std::vector<int> t, p;
      for (double v : truth_by_f[j]) t.push_back(static_cast<int>(v));
      for (double v : pred_by_f[j]) p.push_back(static_cast<int>(v));
      const CategoricalMetrics m =
          categorical_metrics(t, p, schema.at(j).n_categories());
      out.accuracy += m.accuracy;
      out.macro_f1 += m.macro_f1;
      out.kappa += m.kappa;
      ++out.n_categorical;
    } else {
      if (truth_by_f[j].size() < 2) continue;
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (int r = 0; r < complete.n_rows(); ++r) {
        const double v = complete.get(r, j);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (!(hi - lo > 0.0)) continue;
      const ContinuousMetrics m =
          continuous_metrics(truth_by_f[j], pred_by_f[j], hi - lo);
      out.nrmse += m.nrmse;
      out.mae += m.mae;
      out.mb += m.mb;
      out.r2 += m.r2;
      out.spearman += m.spearman;
      ++out.n_continuous;
    }
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (out.n_continuous > 0) {
    out.nrmse /= out.n_continuous;
    out.mae /= out.n_continuous;
    out.mb /= out.n_continuous;
    out.r2 /= out.n_continuous;
    out.spearman /= out.n_continuous;
  } else {
    out.nrmse = out.mae = out.mb = out.r2 = out.spearman = nan;
  }
  if (out.n_categorical > 0) {
    out.accuracy /= out.n_categorical;
    out.macro_f1 /= out.n_categorical;
    out.kappa /= out.n_categorical;
  } else {
    out.accuracy = out.macro_f1 = out.kappa = nan;
  }
  return out;
}

std::string mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::MCAR: return "mcar";
    case Mechanism::MAR: return "mar";
    case Mechanism::MNAR: return "mnar";
  }
  throw std::logic_error("unknown mechanism");
}

Mechanism mechanism_from_string(const std::string& s) {
  if (s == "mcar") return Mechanism::MCAR;
  if (s == "mar") return Mechanism::MAR;
  if (s == "mnar") return Mechanism::MNAR;
  throw std::invalid_argument("unknown mechanism: " + s);
}

namespace {

// MAR needs anchors; default to the first feature, mirroring the injector's
// requirement that anchors stay observed.
std::vector<int> default_anchors(const MixedTable& t, Mechanism m) {
  if (m != Mechanism::MAR) return {};
  if (t.n_features() < 2)
    throw std::invalid_argument("mar benchmark needs >= 2 features");
  return {0};
}

MixedTable impute_by_method(const std::string& method, const MixedTable& t,
                            const SniConfig& base, uint64_t seed, int knn_k) {
  if (method == "meanmode") return mean_mode_impute(t);
  if (method == "knn") return knn_gower_impute(t, knn_k);
  if (method == "sni") {
    SniConfig cfg = base;
    cfg.seed = seed;
    return run(t, cfg).imputed;
  }
  throw std::invalid_argument("unknown method: " + method);
}

}  // namespace

std::vector<BenchmarkRow> run_benchmark(const MixedTable& complete,
                                        const BenchmarkSpec& spec) {
  if (!complete.complete())
    throw std::invalid_argument("benchmark input table must be complete");
  if (spec.mechanisms.empty() || spec.rates.empty() || spec.methods.empty() ||
      spec.seeds.empty())
    throw std::invalid_argument(
        "benchmark needs mechanisms, rates, methods, and seeds");

  std::vector<BenchmarkRow> rows;
  for (Mechanism mech : spec.mechanisms)
    for (double rate : spec.rates)
      for (uint64_t seed : spec.seeds) {
        InjectionSpec inj_spec;
        inj_spec.mechanism = mech;
        inj_spec.rate = rate;
        inj_spec.seed = seed;
        inj_spec.anchor_features = default_anchors(complete, mech);
        const InjectionResult inj = inject(complete, inj_spec);
        for (const std::string& method : spec.methods) {
          const MixedTable imputed =
              impute_by_method(method, inj.table, spec.base, seed, spec.knn_k);
          BenchmarkRow row;
          row.mechanism = mechanism_name(mech);
          row.rate = rate;
          row.method = method;
          row.seed = seed;
          row.eval = evaluate_imputation(complete, imputed, inj.truth);
          rows.push_back(std::move(row));
        }
      }
  return rows;
}

namespace {

constexpr const char* kMetricNames[] = {"nrmse",    "mae",      "mb",
                                        "r2",       "spearman", "accuracy",
                                        "macro_f1", "kappa"};

double metric_value(const EvalSummary& e, int i) {
  switch (i) {
    case 0: return e.nrmse;
    case 1: return e.mae;
    case 2: return e.mb;
    case 3: return e.r2;
    case 4: return e.spearman;
    case 5: return e.accuracy;
    case 6: return e.macro_f1;
    case 7: return e.kappa;
  }
  throw std::logic_error("bad metric index");
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  return format_double(v);
}

}  // namespace

std::string benchmark_csv(const std::vector<BenchmarkRow>& rows) {
  std::ostringstream out;
  out << "mechanism,rate,method,seed";
  for (const char* m : kMetricNames) out << ',' << m;
  out << ",n_continuous,n_categorical\n";
  for (const BenchmarkRow& r : rows) {
    out << r.mechanism << ',' << format_double(r.rate) << ',' << r.method
        << ',' << r.seed;
    for (int i = 0; i < 8; ++i) out << ',' << csv_number(metric_value(r.eval, i));
    out << ',' << r.eval.n_continuous << ',' << r.eval.n_categorical << '\n';
  }
  return out.str();
}

Json benchmark_summary(const std::vector<BenchmarkRow>& rows) {
  std::map<std::tuple<std::string, double, std::string>,
           std::vector<const BenchmarkRow*>>
      groups;
  for (const BenchmarkRow& r : rows)
    groups[{r.mechanism, r.rate, r.method}].push_back(&r);

  Json out = Json::array();
  for (const auto& [key, members] : groups) {
    Json entry;
    entry["mechanism"] = std::get<0>(key);
    entry["rate"] = std::get<1>(key);
    entry["method"] = std::get<2>(key);
    entry["n_seeds"] = members.size();
    Json mean, sd;
    for (int i = 0; i < 8; ++i) {
      std::vector<double> vals;
      for (const BenchmarkRow* r : members) {
        const double v = metric_value(r->eval, i);
        if (!std::isnan(v)) vals.push_back(v);
      }
      if (vals.empty()) continue;
      double mu = 0.0;
      for (double v : vals) mu += v;
      mu /= static_cast<double>(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mu) * (v - mu);
      var /= static_cast<double>(vals.size());
      mean[kMetricNames[i]] = mu;
      sd[kMetricNames[i]] = std::sqrt(var);
    }
    entry["mean"] = std::move(mean);
    entry["sd"] = std::move(sd);
    out.push_back(std::move(entry));
  }
  return out;
}

}  // namespace sni
