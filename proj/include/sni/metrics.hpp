#pragma once

#include <vector>

#include <Eigen/Dense>

namespace sni {

// Sentinel for r2 when SS_tot = 0 but SS_res > 0.
constexpr double kR2Sentinel = -1e30;

struct ContinuousMetrics {
  double nrmse = 0.0;
  double mae = 0.0;
  double mb = 0.0;  // mean(pred - truth): positive = overestimation
  double r2 = 0.0;
  double spearman = 0.0;
};

// feature_range is the empirical range of the complete truth column.
// Requires >= 2 cells and a positive range.
ContinuousMetrics continuous_metrics(const std::vector<double>& truth,
                                     const std::vector<double>& pred,
                                     double feature_range);

struct CategoricalMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  double kappa = 0.0;
};

// K is the number of classes; labels must lie in [0, K).
CategoricalMetrics categorical_metrics(const std::vector<int>& truth,
                                       const std::vector<int>& pred, int K);

// Average ranks (ties -> average of covered ranks, 1-based).
std::vector<double> average_rank_values(const std::vector<double>& v);

// Rank correlation with average-rank ties; 0 when either vector is constant.
double spearman_corr(const std::vector<double>& a,
                     const std::vector<double>& b);

// Per-method mean rank across settings. scores is methods x settings;
// higher_better flags the ranking direction per setting (rank 1 = best).
std::vector<double> average_rank(const Eigen::MatrixXd& scores,
                                 const std::vector<bool>& higher_better);

}  // namespace sni
