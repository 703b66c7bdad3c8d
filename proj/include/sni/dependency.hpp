#pragma once

#include <vector>

#include <Eigen/Dense>

namespace sni {

// Batch-mean attention per head for one trained target: H x (d-1), sources
// ordered by feature index with the target skipped.
struct TargetHeadMeans {
  int target = 0;
  Eigen::MatrixXd head_means;
};

// Head-averaged attention mass, row = target, column = source, zero diagonal.
// Rows are not renormalized. trained[f] marks targets that contributed a row;
// untrained targets keep all-zero rows.
struct DependencyMatrix {
  Eigen::MatrixXd d;
  std::vector<uint8_t> trained;
};

struct GroundTruthGraph {
  Eigen::MatrixXi edges;  // edges(child, parent) = 1

  int size() const { return static_cast<int>(edges.rows()); }
};

// Macro-averaged directed-edge recovery over trained targets with at least
// one true parent.
struct RecoveryScores {
  double auroc = 0.0;
  double auprc = 0.0;
  double precision_at_k = 0.0;
  double recall_at_k = 0.0;
  double hub_rho = 0.0;
};

DependencyMatrix build_dependency(const std::vector<TargetHeadMeans>& targets,
                                  int d);

// Column sums (incoming attention mass per source feature).
std::vector<double> hubness(const DependencyMatrix& dep);

// Mann-Whitney AUROC with tie correction. labels are 0/1; requires at least
// one positive and one negative.
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// Average precision (step-function integral of the PR curve), descending
// scores with ties grouped.
double auprc(const std::vector<double>& scores, const std::vector<int>& labels);

// K is the per-target true-parent count; top-K selection breaks score ties
// toward the lower source index. hub_rho is the Spearman correlation between
// column sums and ground-truth out-degree.
RecoveryScores score_recovery(const DependencyMatrix& dep,
                              const GroundTruthGraph& graph);

}  // namespace sni
