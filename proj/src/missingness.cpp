#include "sni/missingness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "sni/rng.hpp"

namespace sni {

namespace {

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Standardize a driver column (population std; constant columns -> zeros).
std::vector<double> standardize(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= n;
  std::vector<double> z(v.size(), 0.0);
  if (var <= 0.0) return z;
  const double sd = std::sqrt(var);
  for (size_t i = 0; i < v.size(); ++i) z[i] = (v[i] - mean) / sd;
  return z;
}

// Intercept c with mean(sigmoid(z + c)) = rate, by bisection.
double solve_intercept(const std::vector<double>& z, double rate) {
  const auto mean_prob = [&](double c) {
    double acc = 0.0;
    for (double x : z) acc += sigmoid(x + c);
    return acc / static_cast<double>(z.size());
  };
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mean_prob(mid) < rate)
      lo = mid;
    else
      hi = mid;
  }
  const double c = 0.5 * (lo + hi);
  if (std::abs(mean_prob(c) - rate) > 5e-3)
    fail("inject: intercept calibration failed");
  return c;
}

}  // namespace

InjectionResult inject(const MixedTable& t, const InjectionSpec& spec) {
  if (!(spec.rate > 0.0 && spec.rate < 1.0))
    fail("inject: rate must lie in (0, 1)");
  if (!t.complete()) fail("inject: table must be complete");
  const int n = t.n_rows();
  const int d = t.n_features();
  std::vector<bool> is_anchor(static_cast<size_t>(d), false);
  for (int a : spec.anchor_features) {
    if (a < 0 || a >= d) fail("inject: anchor index out of range");
    is_anchor[static_cast<size_t>(a)] = true;
  }
  if (spec.mechanism == Mechanism::MAR && spec.anchor_features.empty())
    fail("inject: MAR requires at least one anchor feature");

  // Column values as plain vectors (drivers for MAR/MNAR).
  std::vector<std::vector<double>> cols(static_cast<size_t>(d),
                                        std::vector<double>(static_cast<size_t>(n)));
  for (int j = 0; j < d; ++j)
    for (int r = 0; r < n; ++r)
      cols[static_cast<size_t>(j)][static_cast<size_t>(r)] = t.get(r, j);

  InjectionResult out{t, {}};
  Rng rng(spec.seed);
  for (int j = 0; j < d; ++j) {
    if (is_anchor[static_cast<size_t>(j)]) continue;

    std::vector<double> prob(static_cast<size_t>(n), spec.rate);
    if (spec.mechanism != Mechanism::MCAR) {
      std::vector<double> driver;
      if (spec.mechanism == Mechanism::MAR) {
        const int anchor = spec.anchor_features[static_cast<size_t>(
            j % static_cast<int>(spec.anchor_features.size()))];
        driver = cols[static_cast<size_t>(anchor)];
      } else if (t.schema().at(j).is_categorical()) {
        // Self-selection on a modal-vs-nonmodal indicator.
        std::vector<int> counts(
            static_cast<size_t>(t.schema().at(j).n_categories()), 0);
        for (double v : cols[static_cast<size_t>(j)])
          ++counts[static_cast<size_t>(std::llround(v))];
        const int modal = static_cast<int>(
            std::max_element(counts.begin(), counts.end()) - counts.begin());
        driver.resize(static_cast<size_t>(n));
        for (int r = 0; r < n; ++r)
          driver[static_cast<size_t>(r)] =
              std::llround(cols[static_cast<size_t>(j)][static_cast<size_t>(r)]) ==
                      modal
                  ? 1.0
                  : 0.0;
      } else {
        driver = cols[static_cast<size_t>(j)];
      }
      const std::vector<double> z = standardize(driver);
      const double c = solve_intercept(z, spec.rate);
      for (int r = 0; r < n; ++r)
        prob[static_cast<size_t>(r)] = sigmoid(z[static_cast<size_t>(r)] + c);
    }

    for (int r = 0; r < n; ++r) {
      if (!rng.bernoulli(prob[static_cast<size_t>(r)])) continue;
      out.truth.push_back(HeldOutCell{r, j, t.get(r, j)});
      out.table.set_missing(r, j);
    }
  }
  return out;
}

}  // namespace sni
