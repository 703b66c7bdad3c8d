#include "sni/engine.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "sni/baselines.hpp"

namespace sni {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

void SniConfig::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) fail("sni config: rho must lie in (0, 1)");
  if (alpha0 < 0.0) fail("sni config: alpha0 must be >= 0");
  if (!(gamma_decay > 0.0 && gamma_decay <= 1.0))
    fail("sni config: gamma_decay must lie in (0, 1]");
  if (em_iters < 1 || em_iters > kMaxEmIters)
    fail("sni config: em_iters must lie in [1, " +
         std::to_string(kMaxEmIters) + "]");
  if (!(tol > 0.0)) fail("sni config: tol must be positive");
  if (threads < 1) fail("sni config: threads must be >= 1");
  cpfa.validate();
}

std::vector<double> initialize(const MixedTable& t) {
  return mean_mode_fill(t);
}

std::vector<uint8_t> pseudo_mask(const std::vector<int>& rows, double rho,
                                 Rng& rng) {
  if (rows.size() < 2) fail("pseudo_mask: need at least 2 rows");
  if (!(rho > 0.0 && rho < 1.0)) fail("pseudo_mask: rho must lie in (0, 1)");
  std::vector<uint8_t> mask(rows.size());
  for (int attempt = 0; attempt < 100000; ++attempt) {
    size_t n_masked = 0;
    for (size_t i = 0; i < rows.size(); ++i) {
      mask[i] = rng.bernoulli(rho) ? 1 : 0;
      n_masked += mask[i];
    }
    if (n_masked > 0 && n_masked < rows.size()) return mask;
  }
  throw std::runtime_error("pseudo_mask: resampling failed to produce a "
                           "non-degenerate mask");
}

double convergence_delta(
    const MixedTable& t,
    const std::vector<std::optional<StandardizerStats>>& stats,
    const std::vector<double>& prev, const std::vector<double>& next) {
  const size_t cells =
      static_cast<size_t>(t.n_rows()) * static_cast<size_t>(t.n_features());
  if (prev.size() != cells || next.size() != cells)
    fail("convergence_delta: shape mismatch");

  double num2 = 0.0, den2 = 0.0;
  for (int r = 0; r < t.n_rows(); ++r) {
    for (int j = 0; j < t.n_features(); ++j) {
      const size_t i =
          static_cast<size_t>(r) * t.n_features() + static_cast<size_t>(j);
      if (t.schema().at(j).is_categorical()) {
        num2 += prev[i] != next[i] ? 1.0 : 0.0;
        den2 += 1.0;
      } else {
        const auto& s = stats[static_cast<size_t>(j)];
        const double zp = (prev[i] - s->mean) / s->std;
        const double zn = (next[i] - s->mean) / s->std;
        num2 += (zn - zp) * (zn - zp);
        den2 += zp * zp;
      }
    }
  }
  if (den2 == 0.0)
    return num2 == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num2) / std::sqrt(den2);
}

FeatureInputs build_feature_inputs(
    const MixedTable& t, const std::vector<double>& filled,
    const std::vector<std::optional<StandardizerStats>>& stats, int target,
    bool mask_aware) {
  const int n = t.n_rows();
  const int d = t.n_features();
  if (d < 2) fail("build_feature_inputs: need at least 2 features");
  if (target < 0 || target >= d)
    fail("build_feature_inputs: target out of range");

  FeatureInputs out;
  int width = 0;
  for (int j = 0; j < d; ++j) {
    if (j == target) continue;
    const Feature& f = t.schema().at(j);
    const int w = f.is_categorical() ? f.n_categories() : 1;
    out.tokens.push_back(TokenSpec{width, w, false});
    width += w;
  }
  out.feature_tokens = d - 1;
  if (mask_aware) {
    for (int i = 0; i < d - 1; ++i)
      out.tokens.push_back(TokenSpec{width + i, 1, true});
    width += d - 1;
  }

  out.rows = Eigen::MatrixXd::Zero(n, width);
  const int ind_base = width - (d - 1);
  int off = 0;
  int src = 0;
  for (int j = 0; j < d; ++j) {
    if (j == target) continue;
    const Feature& f = t.schema().at(j);
    for (int r = 0; r < n; ++r) {
      const double v =
          filled[static_cast<size_t>(r) * d + static_cast<size_t>(j)];
      if (f.is_categorical()) {
        out.rows(r, off + static_cast<int>(std::llround(v))) = 1.0;
      } else {
        const auto& s = stats[static_cast<size_t>(j)];
        out.rows(r, off) = (v - s->mean) / s->std;
      }
      if (mask_aware)
        out.rows(r, ind_base + src) = t.observed(r, j) ? 1.0 : 0.0;
    }
    off += f.is_categorical() ? f.n_categories() : 1;
    ++src;
  }
  return out;
}

namespace {

struct FeatureTask {
  int target = 0;
  std::vector<int> missing_rows;
  std::vector<double> imputed;  // aligned with missing_rows
  FeatureSummary summary;
  Eigen::MatrixXd head_means_full;  // H x T including indicator tokens
};

Eigen::MatrixXd gather(const Eigen::MatrixXd& src,
                       const std::vector<int>& rows) {
  Eigen::MatrixXd out(static_cast<int>(rows.size()), src.cols());
  for (size_t i = 0; i < rows.size(); ++i)
    out.row(static_cast<int>(i)) = src.row(rows[i]);
  return out;
}

void train_one_feature(const MixedTable& t, const SniConfig& config,
                       const std::vector<double>& x_current,
                       const std::vector<std::optional<StandardizerStats>>& stats,
                       const Partition& part, const PriorVector& prior,
                       double alpha_g, int em_iter, FeatureTask& task) {
  const int f = task.target;
  const Feature& feat = t.schema().at(f);

  std::vector<int> rows_obs_tr;
  for (int r : part.train)
    if (t.observed(r, f)) rows_obs_tr.push_back(r);
  if (rows_obs_tr.size() < 2)
    fail("run: feature '" + feat.name +
         "' has fewer than 2 observed training rows");

  Rng mask_rng(derive_stream(config.seed, static_cast<uint64_t>(em_iter),
                             static_cast<uint64_t>(f) * 4 + 0));
  const std::vector<uint8_t> pmask =
      pseudo_mask(rows_obs_tr, config.rho, mask_rng);

  std::vector<int> train_rows, val_rows;
  for (size_t i = 0; i < rows_obs_tr.size(); ++i)
    (pmask[i] ? val_rows : train_rows).push_back(rows_obs_tr[i]);
  for (int r : part.validation)
    if (t.observed(r, f)) val_rows.push_back(r);

  const FeatureInputs inputs =
      build_feature_inputs(t, x_current, stats, f, config.mask_aware);

  const auto target_of = [&](int r) {
    const double v = t.get(r, f);
    if (feat.is_categorical()) return v;
    const auto& s = stats[static_cast<size_t>(f)];
    return (v - s->mean) / s->std;
  };
  FeatureDataset data;
  data.train_inputs = gather(inputs.rows, train_rows);
  data.val_inputs = gather(inputs.rows, val_rows);
  data.train_targets.resize(static_cast<int>(train_rows.size()));
  for (size_t i = 0; i < train_rows.size(); ++i)
    data.train_targets(static_cast<int>(i)) = target_of(train_rows[i]);
  data.val_targets.resize(static_cast<int>(val_rows.size()));
  for (size_t i = 0; i < val_rows.size(); ++i)
    data.val_targets(static_cast<int>(i)) = target_of(val_rows[i]);

  CpfaConfig cpfa_cfg = config.cpfa;
  cpfa_cfg.prior_weight = alpha_g;
  Rng init_rng(derive_stream(config.seed, static_cast<uint64_t>(em_iter),
                             static_cast<uint64_t>(f) * 4 + 1));
  CpfaModel model = make_cpfa_model(
      cpfa_cfg, inputs.tokens, inputs.feature_tokens,
      static_cast<int>(inputs.rows.cols()), feat.is_categorical(),
      feat.is_categorical() ? feat.n_categories() : 1, init_rng);

  const uint64_t train_seed = derive_stream(
      config.seed, static_cast<uint64_t>(em_iter),
      static_cast<uint64_t>(f) * 4 + 2);
  TrainResult trained = train_feature(std::move(model), data, prior,
                                      train_seed);

  const Eigen::MatrixXd missing_inputs = gather(inputs.rows, task.missing_rows);
  task.imputed.resize(task.missing_rows.size());
  if (feat.is_categorical()) {
    const std::vector<int> labels =
        predict_classification(trained.model, missing_inputs);
    for (size_t i = 0; i < labels.size(); ++i)
      task.imputed[i] = static_cast<double>(labels[i]);
  } else {
    const auto& s = stats[static_cast<size_t>(f)];
    const Eigen::VectorXd z = predict_regression(trained.model, missing_inputs);
    for (size_t i = 0; i < task.imputed.size(); ++i) {
      const double raw = z(static_cast<int>(i)) * s->std + s->mean;
      task.imputed[i] = clip_to_observed_range(raw, *s);
    }
  }

  task.head_means_full =
      head_means_on(trained.model, gather(inputs.rows, rows_obs_tr));
  task.summary.target = f;
  task.summary.lambdas = trained.model.lambdas();
  task.summary.head_means =
      task.head_means_full.leftCols(inputs.feature_tokens);
  task.summary.history = std::move(trained.history);
  task.summary.lambda_trajectory = std::move(trained.lambda_trajectory);
  task.summary.best_epoch = trained.best_epoch;
}

}  // namespace

ImputationResult run(const MixedTable& t, const SniConfig& config) {
  config.validate();
  const int n = t.n_rows();
  const int d = t.n_features();
  if (d < 2) fail("run: need at least 2 features");

  const Partition part = partition_rows(n, config.partition_fractions,
                                        config.seed);
  const auto stats = compute_standardizers(t);
  std::vector<double> x_cur = initialize(t);
  const std::vector<int> targets = t.features_with_missing();

  ImputationResult result{t,  DependencyMatrix{},      Eigen::MatrixXd(),
                          {}, std::vector<double>(),   std::vector<double>(),
                          0,  part};

  if (targets.empty()) {
    // Already complete: one bookkeeping iteration, nothing retrained.
    const CorrelationDesign design =
        build_correlation_design(t, x_cur, stats);
    AssociationMatrix assoc = pearson_corr(design, part.train);
    if (config.fisher) assoc = fisher_z(std::move(assoc));
    result.priors = prior_matrix(assoc, design);
    result.dependency = build_dependency({}, d);
    result.delta_log.push_back(0.0);
    result.alpha_log.push_back(config.alpha0);
    result.iterations = 1;
    return result;
  }

  std::vector<FeatureSummary> summaries;
  int below_tol_streak = 0;

  for (int g = 1; g <= config.em_iters; ++g) {
    const CorrelationDesign design =
        build_correlation_design(t, x_cur, stats);
    AssociationMatrix assoc = pearson_corr(design, part.train);
    if (config.fisher) assoc = fisher_z(std::move(assoc));
    const Eigen::MatrixXd priors = prior_matrix(assoc, design);
    const double alpha_g =
        config.alpha0 * std::pow(config.gamma_decay, g - 1);
    result.alpha_log.push_back(alpha_g);

    std::vector<FeatureTask> tasks(targets.size());
    for (size_t i = 0; i < targets.size(); ++i) {
      tasks[i].target = targets[i];
      for (int r = 0; r < n; ++r)
        if (!t.observed(r, targets[i])) tasks[i].missing_rows.push_back(r);
    }

    const auto run_task = [&](FeatureTask& task) {
      PriorVector prior;
      prior.target = task.target;
      for (int j = 0; j < d; ++j) {
        if (j == task.target) continue;
        prior.weights.push_back(priors(task.target, j));
      }
      train_one_feature(t, config, x_cur, stats, part, prior, alpha_g, g,
                        task);
    };

    if (config.threads <= 1 || tasks.size() <= 1) {
      for (FeatureTask& task : tasks) run_task(task);
    } else {
      std::atomic<size_t> next{0};
      std::exception_ptr error;
      std::mutex error_mu;
      const int n_workers =
          std::min<int>(config.threads, static_cast<int>(tasks.size()));
      std::vector<std::thread> workers;
      workers.reserve(static_cast<size_t>(n_workers));
      for (int w = 0; w < n_workers; ++w) {
        workers.emplace_back([&] {
          for (;;) {
            const size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            try {
              run_task(tasks[i]);
            } catch (...) {
              std::lock_guard<std::mutex> lock(error_mu);
              if (!error) error = std::current_exception();
              return;
            }
          }
        });
      }
      for (std::thread& w : workers) w.join();
      if (error) std::rethrow_exception(error);
    }

    std::vector<double> x_next = x_cur;
    for (const FeatureTask& task : tasks)
      for (size_t i = 0; i < task.missing_rows.size(); ++i)
        x_next[static_cast<size_t>(task.missing_rows[i]) * d +
               static_cast<size_t>(task.target)] = task.imputed[i];

    const double delta = convergence_delta(t, stats, x_cur, x_next);
    result.delta_log.push_back(delta);
    x_cur = std::move(x_next);

    summaries.clear();
    for (FeatureTask& task : tasks) summaries.push_back(std::move(task.summary));
    result.priors = priors;
    result.iterations = g;

    below_tol_streak = delta < config.tol ? below_tol_streak + 1 : 0;
    if (below_tol_streak >= 2) break;
  }

  for (const FeatureSummary& s : summaries) {
    for (int r = 0; r < n; ++r) {
      if (t.observed(r, s.target)) continue;
      result.imputed.set(r, s.target,
                         x_cur[static_cast<size_t>(r) * d +
                               static_cast<size_t>(s.target)]);
    }
  }

  std::vector<TargetHeadMeans> rows;
  rows.reserve(summaries.size());
  for (const FeatureSummary& s : summaries)
    rows.push_back(TargetHeadMeans{s.target, s.head_means});
  result.dependency = build_dependency(rows, d);
  result.features = std::move(summaries);
  return result;
}

}  // namespace sni
