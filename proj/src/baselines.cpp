#include "sni/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sni {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

// Observed mean per continuous feature, observed mode (lowest index wins
// ties) per categorical feature.
std::vector<double> column_fills(const MixedTable& t) {
  std::vector<double> fill(static_cast<size_t>(t.n_features()));
  for (int j = 0; j < t.n_features(); ++j) {
    const Feature& f = t.schema().at(j);
    int n_obs = 0;
    if (f.is_categorical()) {
      std::vector<int> counts(static_cast<size_t>(f.n_categories()), 0);
      for (int r = 0; r < t.n_rows(); ++r) {
        if (!t.observed(r, j)) continue;
        ++counts[static_cast<size_t>(std::llround(t.get(r, j)))];
        ++n_obs;
      }
      if (n_obs == 0)
        fail("mean_mode: feature '" + f.name + "' is fully missing");
      int mode = 0;
      for (int c = 1; c < f.n_categories(); ++c)
        if (counts[static_cast<size_t>(c)] > counts[static_cast<size_t>(mode)])
          mode = c;
      fill[static_cast<size_t>(j)] = static_cast<double>(mode);
    } else {
      double sum = 0.0;
      for (int r = 0; r < t.n_rows(); ++r) {
        if (!t.observed(r, j)) continue;
        sum += t.get(r, j);
        ++n_obs;
      }
      if (n_obs == 0)
        fail("mean_mode: feature '" + f.name + "' is fully missing");
      fill[static_cast<size_t>(j)] = sum / n_obs;
    }
  }
  return fill;
}

}  // namespace

std::vector<double> mean_mode_fill(const MixedTable& t) {
  const std::vector<double> fill = column_fills(t);
  std::vector<double> out(static_cast<size_t>(t.n_rows()) *
                          static_cast<size_t>(t.n_features()));
  for (int r = 0; r < t.n_rows(); ++r)
    for (int j = 0; j < t.n_features(); ++j)
      out[static_cast<size_t>(r) * t.n_features() + static_cast<size_t>(j)] =
          t.observed(r, j) ? t.get(r, j) : fill[static_cast<size_t>(j)];
  return out;
}

MixedTable mean_mode_impute(const MixedTable& t) {
  const std::vector<double> fill = column_fills(t);
  MixedTable out = t;
  for (int r = 0; r < t.n_rows(); ++r)
    for (int j = 0; j < t.n_features(); ++j)
      if (!t.observed(r, j)) out.set(r, j, fill[static_cast<size_t>(j)]);
  return out;
}

double gower_distance(
    const MixedTable& t, int row_a, int row_b,
    const std::vector<std::optional<StandardizerStats>>& stats) {
  double acc = 0.0;
  int co_observed = 0;
  for (int j = 0; j < t.n_features(); ++j) {
    if (!t.observed(row_a, j) || !t.observed(row_b, j)) continue;
    ++co_observed;
    const double va = t.get(row_a, j);
    const double vb = t.get(row_b, j);
    if (t.schema().at(j).is_categorical()) {
      acc += va == vb ? 0.0 : 1.0;
    } else {
      const auto& s = stats[static_cast<size_t>(j)];
      const double range = s->observed_max - s->observed_min;
      acc += range > 0.0 ? std::abs(va - vb) / range : 0.0;
    }
  }
  return co_observed > 0 ? acc / co_observed : 1.0;
}

MixedTable knn_gower_impute(const MixedTable& t, int k) {
  if (k < 1) fail("knn_gower: k must be >= 1");
  const std::vector<double> fill = column_fills(t);
  const auto stats = compute_standardizers(t);
  MixedTable out = t;

  for (int r = 0; r < t.n_rows(); ++r) {
    std::vector<std::pair<double, int>> dist;  // (distance, donor row)
    bool dist_ready = false;
    for (int j = 0; j < t.n_features(); ++j) {
      if (t.observed(r, j)) continue;
      if (!dist_ready) {
        dist.reserve(static_cast<size_t>(t.n_rows() - 1));
        for (int q = 0; q < t.n_rows(); ++q) {
          if (q == r) continue;
          dist.emplace_back(gower_distance(t, r, q, stats), q);
        }
        std::sort(dist.begin(), dist.end());
        dist_ready = true;
      }

      const Feature& f = t.schema().at(j);
      int taken = 0;
      double sum = 0.0;
      std::vector<int> counts(
          f.is_categorical() ? static_cast<size_t>(f.n_categories()) : 0, 0);
      for (const auto& [dv, q] : dist) {
        if (!t.observed(q, j)) continue;
        if (f.is_categorical())
          ++counts[static_cast<size_t>(std::llround(t.get(q, j)))];
        else
          sum += t.get(q, j);
        if (++taken == k) break;
      }
      if (taken == 0) {
        out.set(r, j, fill[static_cast<size_t>(j)]);
      } else if (f.is_categorical()) {
        int mode = 0;
        for (int c = 1; c < f.n_categories(); ++c)
          if (counts[static_cast<size_t>(c)] >
              counts[static_cast<size_t>(mode)])
            mode = c;
        out.set(r, j, static_cast<double>(mode));
      } else {
        out.set(r, j, sum / taken);
      }
    }
  }
  return out;
}

}  // namespace sni
