#include "sni/dependency.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sni/metrics.hpp"

namespace sni {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

}  // namespace

DependencyMatrix build_dependency(const std::vector<TargetHeadMeans>& targets,
                                  int d) {
  if (d < 2) fail("build_dependency: need at least 2 features");
  DependencyMatrix dep;
  dep.d = Eigen::MatrixXd::Zero(d, d);
  dep.trained.assign(static_cast<size_t>(d), 0);
  for (const TargetHeadMeans& t : targets) {
    if (t.target < 0 || t.target >= d)
      fail("build_dependency: target index out of range");
    if (t.head_means.cols() != d - 1 || t.head_means.rows() < 1)
      fail("build_dependency: head means must be H x (d-1)");
    if (dep.trained[static_cast<size_t>(t.target)])
      fail("build_dependency: duplicate target");
    const Eigen::RowVectorXd row = t.head_means.colwise().mean();
    int i = 0;
    for (int j = 0; j < d; ++j) {
      if (j == t.target) continue;
      dep.d(t.target, j) = row(i++);
    }
    dep.trained[static_cast<size_t>(t.target)] = 1;
  }
  return dep;
}

std::vector<double> hubness(const DependencyMatrix& dep) {
  const int d = static_cast<int>(dep.d.cols());
  std::vector<double> out(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j) out[static_cast<size_t>(j)] = dep.d.col(j).sum();
  return out;
}

double auroc(const std::vector<double>& scores,
             const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    fail("auroc: invalid inputs");
  int n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) fail("auroc: labels must be 0/1");
    n_pos += l;
  }
  const int n_neg = static_cast<int>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    fail("auroc: need at least one positive and one negative");

  // Mann-Whitney U from average ranks (ties handled by midranks).
  const std::vector<double> ranks = average_rank_values(scores);
  double rank_pos = 0.0;
  for (size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == 1) rank_pos += ranks[i];
  const double u = rank_pos - 0.5 * n_pos * (n_pos + 1.0);
  return u / (static_cast<double>(n_pos) * n_neg);
}

double auprc(const std::vector<double>& scores,
             const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    fail("auprc: invalid inputs");
  int n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) fail("auprc: labels must be 0/1");
    n_pos += l;
  }
  if (n_pos == 0) fail("auprc: need at least one positive");

  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] > scores[b];
  });

  // Step integral of precision over recall, distinct scores grouped.
  double ap = 0.0;
  double prev_recall = 0.0;
  double tp = 0.0, fp = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() &&
           scores[order[j + 1]] == scores[order[i]])
      ++j;
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1)
        tp += 1.0;
      else
        fp += 1.0;
    }
    const double recall = tp / n_pos;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j + 1;
  }
  return ap;
}

RecoveryScores score_recovery(const DependencyMatrix& dep,
                              const GroundTruthGraph& graph) {
  const int d = static_cast<int>(dep.d.rows());
  if (graph.size() != d) fail("score_recovery: shape mismatch");
  if (graph.edges.sum() == 0) fail("score_recovery: graph has no edges");
  for (int i = 0; i < d; ++i)
    if (graph.edges(i, i) != 0) fail("score_recovery: graph diagonal not zero");

  double sum_auroc = 0.0, sum_auprc = 0.0, sum_p = 0.0, sum_r = 0.0;
  int n_rank = 0, n_topk = 0;
  for (int f = 0; f < d; ++f) {
    if (!dep.trained[static_cast<size_t>(f)]) continue;
    std::vector<double> scores;
    std::vector<int> labels;
    std::vector<int> sources;
    int k_true = 0;
    for (int j = 0; j < d; ++j) {
      if (j == f) continue;
      scores.push_back(dep.d(f, j));
      labels.push_back(graph.edges(f, j) ? 1 : 0);
      sources.push_back(j);
      k_true += graph.edges(f, j) ? 1 : 0;
    }
    if (k_true == 0) continue;  // targets without parents are skipped

    if (k_true < static_cast<int>(labels.size())) {
      sum_auroc += auroc(scores, labels);
      sum_auprc += auprc(scores, labels);
      ++n_rank;
    }

    // Top-K by score, ties toward the lower source index.
    std::vector<size_t> order(scores.size());
    std::iota(order.begin(), order.end(), size_t{0});
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
      if (scores[a] != scores[b]) return scores[a] > scores[b];
      return sources[a] < sources[b];
    });
    int hits = 0;
    for (int k = 0; k < k_true; ++k)
      hits += labels[order[static_cast<size_t>(k)]];
    sum_p += static_cast<double>(hits) / k_true;
    sum_r += static_cast<double>(hits) / k_true;
    ++n_topk;
  }
  if (n_topk == 0)
    fail("score_recovery: no trained target has a true parent");

  RecoveryScores out;
  out.auroc = n_rank > 0 ? sum_auroc / n_rank : 0.0;
  out.auprc = n_rank > 0 ? sum_auprc / n_rank : 0.0;
  out.precision_at_k = sum_p / n_topk;
  out.recall_at_k = sum_r / n_topk;

  const std::vector<double> hub = hubness(dep);
  std::vector<double> out_degree(static_cast<size_t>(d));
  for (int j = 0; j < d; ++j)
    out_degree[static_cast<size_t>(j)] =
        static_cast<double>(graph.edges.col(j).sum());
  out.hub_rho = spearman_corr(hub, out_degree);
  return out;
}

}  // namespace sni
