#pragma once

#include <vector>

#include <Eigen/Dense>

#include "sni/table.hpp"

namespace sni {

// Pairwise association over design-matrix columns.
struct AssociationMatrix {
  Eigen::MatrixXd sigma;
  bool fisher_applied = false;
};

// Pearson correlation over the given rows of the design matrix. Degenerate
// (zero-variance) columns correlate 0 with everything and 1 with themselves.
// Requires at least 2 rows. The result is symmetric with unit diagonal.
AssociationMatrix pearson_corr(const CorrelationDesign& design,
                               const std::vector<int>& rows);

// Maps off-diagonal entries by atanh with inputs clamped to |r| <= 1 - 1e-7.
// May be applied at most once.
AssociationMatrix fisher_z(AssociationMatrix m);

// Prior attention weights for one target feature. weights[i] corresponds to
// source feature i for i < target and i+1 for i >= target.
struct PriorVector {
  int target = 0;
  std::vector<double> weights;
};

// Cross-group mean of absolute associations, normalized to the simplex.
// All-zero relevance (e.g. a fully degenerate design) falls back to uniform.
PriorVector aggregate_prior(const AssociationMatrix& assoc,
                            const CorrelationDesign& design, int target);

// Stacks per-target priors into a d x d row-per-target matrix, zero diagonal.
Eigen::MatrixXd prior_matrix(const AssociationMatrix& assoc,
                             const CorrelationDesign& design);

}  // namespace sni
