#include "sni/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sni {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

double pearson_of(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

}  // namespace

std::vector<double> average_rank_values(const std::vector<double>& v) {
  const size_t n = v.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t x, size_t y) { return v[x] < v[y]; });
  std::vector<double> ranks(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman_corr(const std::vector<double>& a,
                     const std::vector<double>& b) {
  if (a.size() != b.size()) fail("spearman: length mismatch");
  if (a.size() < 2) fail("spearman: need at least 2 values");
  const bool const_a = std::all_of(a.begin(), a.end(),
                                   [&](double x) { return x == a.front(); });
  const bool const_b = std::all_of(b.begin(), b.end(),
                                   [&](double x) { return x == b.front(); });
  if (const_a || const_b) return 0.0;
  return pearson_of(average_rank_values(a), average_rank_values(b));
}

ContinuousMetrics continuous_metrics(const std::vector<double>& truth,
                                     const std::vector<double>& pred,
                                     double feature_range) {
  if (truth.size() != pred.size()) fail("continuous_metrics: length mismatch");
  if (truth.size() < 2) fail("continuous_metrics: need at least 2 cells");
  if (!(feature_range > 0.0))
    fail("continuous_metrics: feature_range must be positive");
  const double n = static_cast<double>(truth.size());

  ContinuousMetrics m;
  double se = 0.0;
  double truth_mean = 0.0;
  for (size_t i = 0; i < truth.size(); ++i) {
    const double e = pred[i] - truth[i];
    se += e * e;
    m.mae += std::abs(e);
    m.mb += e;
    truth_mean += truth[i];
  }
  m.nrmse = std::sqrt(se / n) / feature_range;
  m.mae /= n;
  m.mb /= n;
  truth_mean /= n;

  double ss_tot = 0.0;
  for (double t : truth) ss_tot += (t - truth_mean) * (t - truth_mean);
  if (ss_tot > 0.0) {
    m.r2 = 1.0 - se / ss_tot;
  } else {
    m.r2 = se == 0.0 ? 0.0 : kR2Sentinel;
  }
  m.spearman = spearman_corr(truth, pred);
  return m;
}

CategoricalMetrics categorical_metrics(const std::vector<int>& truth,
                                       const std::vector<int>& pred, int K) {
  if (truth.size() != pred.size())
    fail("categorical_metrics: length mismatch");
  if (truth.empty()) fail("categorical_metrics: empty input");
  if (K < 2) fail("categorical_metrics: need at least 2 classes");
  const double n = static_cast<double>(truth.size());

  Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(K, K);
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= K || pred[i] < 0 || pred[i] >= K)
      fail("categorical_metrics: label out of range");
    confusion(truth[i], pred[i]) += 1.0;
  }

  CategoricalMetrics m;
  m.accuracy = confusion.trace() / n;

  double f1_sum = 0.0;
  int f1_classes = 0;
  for (int k = 0; k < K; ++k) {
    const double tp = confusion(k, k);
    const double in_truth = confusion.row(k).sum();
    const double in_pred = confusion.col(k).sum();
    if (in_truth == 0.0 && in_pred == 0.0) continue;  // class absent entirely
    const double denom = 2.0 * tp + (in_pred - tp) + (in_truth - tp);
    f1_sum += denom > 0.0 ? 2.0 * tp / denom : 0.0;
    ++f1_classes;
  }
  m.macro_f1 = f1_classes > 0 ? f1_sum / f1_classes : 0.0;

  double p_e = 0.0;
  for (int k = 0; k < K; ++k)
    p_e += (confusion.row(k).sum() / n) * (confusion.col(k).sum() / n);
  m.kappa = std::abs(1.0 - p_e) < 1e-15
                ? 0.0
                : (m.accuracy - p_e) / (1.0 - p_e);
  return m;
}

std::vector<double> average_rank(const Eigen::MatrixXd& scores,
                                 const std::vector<bool>& higher_better) {
  const int n_methods = static_cast<int>(scores.rows());
  const int n_settings = static_cast<int>(scores.cols());
  if (n_methods < 1 || n_settings < 1) fail("average_rank: empty table");
  if (static_cast<int>(higher_better.size()) != n_settings)
    fail("average_rank: direction flags must match settings");
  for (int i = 0; i < n_methods; ++i)
    for (int j = 0; j < n_settings; ++j)
      if (!std::isfinite(scores(i, j)))
        fail("average_rank: missing cell in results table");

  std::vector<double> mean_rank(static_cast<size_t>(n_methods), 0.0);
  for (int j = 0; j < n_settings; ++j) {
    std::vector<double> col(static_cast<size_t>(n_methods));
    for (int i = 0; i < n_methods; ++i)
      col[static_cast<size_t>(i)] =
          higher_better[static_cast<size_t>(j)] ? -scores(i, j) : scores(i, j);
    const std::vector<double> ranks = average_rank_values(col);
    for (int i = 0; i < n_methods; ++i)
      mean_rank[static_cast<size_t>(i)] += ranks[static_cast<size_t>(i)];
  }
  for (double& r : mean_rank) r /= n_settings;
  return mean_rank;
}

}  // namespace sni
