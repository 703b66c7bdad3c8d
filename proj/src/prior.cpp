#include "sni/prior.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sni {

AssociationMatrix pearson_corr(const CorrelationDesign& design,
                               const std::vector<int>& rows) {
  const int m = static_cast<int>(rows.size());
  if (m < 2)
    throw std::invalid_argument("pearson_corr: need at least 2 rows");
  const int w = design.width();

  Eigen::MatrixXd sub(m, w);
  for (int i = 0; i < m; ++i) sub.row(i) = design.matrix.row(rows[static_cast<size_t>(i)]);

  const Eigen::RowVectorXd mean = sub.colwise().mean();
  sub.rowwise() -= mean;
  const Eigen::VectorXd ss = sub.colwise().squaredNorm();

  // A column is degenerate when its centered sum of squares is numerically
  // zero relative to the row count.
  const double tiny = 1e-24 * m;
  std::vector<bool> degenerate(static_cast<size_t>(w));
  for (int c = 0; c < w; ++c) degenerate[static_cast<size_t>(c)] = ss(c) <= tiny;

  AssociationMatrix out;
  out.sigma = Eigen::MatrixXd::Identity(w, w);
  for (int a = 0; a < w; ++a) {
    if (degenerate[static_cast<size_t>(a)]) continue;
    for (int b = a + 1; b < w; ++b) {
      if (degenerate[static_cast<size_t>(b)]) continue;
      double r = sub.col(a).dot(sub.col(b)) / std::sqrt(ss(a) * ss(b));
      r = std::clamp(r, -1.0, 1.0);
      out.sigma(a, b) = r;
      out.sigma(b, a) = r;
    }
  }
  return out;
}

AssociationMatrix fisher_z(AssociationMatrix m) {
  if (m.fisher_applied)
    throw std::invalid_argument("fisher_z: transform already applied");
  constexpr double cap = 1.0 - 1e-7;
  const int w = static_cast<int>(m.sigma.rows());
  for (int a = 0; a < w; ++a)
    for (int b = 0; b < w; ++b) {
      if (a == b) continue;
      m.sigma(a, b) = std::atanh(std::clamp(m.sigma(a, b), -cap, cap));
    }
  m.fisher_applied = true;
  return m;
}

PriorVector aggregate_prior(const AssociationMatrix& assoc,
                            const CorrelationDesign& design, int target) {
  const int d = static_cast<int>(design.column_groups.size());
  if (d < 2)
    throw std::invalid_argument("aggregate_prior: need at least 2 features");
  if (target < 0 || target >= d)
    throw std::invalid_argument("aggregate_prior: target out of range");
  if (assoc.sigma.rows() != design.width())
    throw std::invalid_argument(
        "aggregate_prior: association/design width mismatch");

  const auto [t_off, t_w] = design.column_groups[static_cast<size_t>(target)];
  PriorVector p;
  p.target = target;
  p.weights.reserve(static_cast<size_t>(d - 1));
  double total = 0.0;
  for (int j = 0; j < d; ++j) {
    if (j == target) continue;
    const auto [j_off, j_w] = design.column_groups[static_cast<size_t>(j)];
    double acc = 0.0;
    for (int l = 0; l < j_w; ++l)
      for (int k = 0; k < t_w; ++k)
        acc += std::abs(assoc.sigma(j_off + l, t_off + k));
    const double r = acc / (static_cast<double>(j_w) * t_w);
    p.weights.push_back(r);
    total += r;
  }
  if (total <= 0.0) {
    const double u = 1.0 / static_cast<double>(d - 1);
    for (double& v : p.weights) v = u;
  } else {
    for (double& v : p.weights) v /= total;
  }
  return p;
}

Eigen::MatrixXd prior_matrix(const AssociationMatrix& assoc,
                             const CorrelationDesign& design) {
  const int d = static_cast<int>(design.column_groups.size());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(d, d);
  for (int f = 0; f < d; ++f) {
    const PriorVector p = aggregate_prior(assoc, design, f);
    int i = 0;
    for (int j = 0; j < d; ++j) {
      if (j == f) continue;
      out(f, j) = p.weights[static_cast<size_t>(i++)];
    }
  }
  return out;
}

}  // namespace sni
