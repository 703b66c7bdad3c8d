#pragma once

#include <vector>

#include "sni/table.hpp"

namespace sni {

// Row-major n x d completed value matrix: observed cells copied verbatim,
// continuous gaps filled with the observed mean, categorical gaps with the
// observed mode (ties -> lowest category index).
std::vector<double> mean_mode_fill(const MixedTable& t);

MixedTable mean_mode_impute(const MixedTable& t);

// Gower distance between two rows: mean over co-observed features of
// |x_a - x_b| / observed range (continuous, range 0 -> 0) or 0/1 equality
// (categorical). Rows with no co-observed features are at distance 1.
double gower_distance(const MixedTable& t, int row_a, int row_b,
                      const std::vector<std::optional<StandardizerStats>>& stats);

// k-nearest-neighbour imputation under Gower distance. Donors must have the
// target feature observed; distance ties break toward the lower row index;
// cells without any donor fall back to mean/mode.
MixedTable knn_gower_impute(const MixedTable& t, int k = 5);

}  // namespace sni
