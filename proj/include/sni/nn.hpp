#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sni/rng.hpp"

namespace sni {

double softplus(double x);
double inverse_softplus(double y);  // y > 0

struct LrSchedule {
  double base_lr = 1e-3;
  double min_lr = 1e-6;
  int total_steps = 50;
};

// Cosine annealing: min + 0.5 (base - min)(1 + cos(pi * step / total)).
double cosine_lr(const LrSchedule& s, int step);

// AdamW with decoupled weight decay. All parameter tensors are registered
// once; step() applies bias-corrected moment updates in registration order.
class AdamW {
 public:
  explicit AdamW(double weight_decay = 1e-4, double beta1 = 0.9,
                 double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {}

  void init(const std::vector<Eigen::MatrixXd*>& params);

  // grads[i] may be empty (treated as zero). lr is supplied per step so a
  // schedule can drive it.
  void step(const std::vector<Eigen::MatrixXd*>& params,
            const std::vector<const Eigen::MatrixXd*>& grads, double lr);

  int64_t step_count() const { return step_count_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  int64_t step_count_ = 0;
  std::vector<Eigen::MatrixXd> m_, v_;
};

// Uniform(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
Eigen::MatrixXd glorot_uniform(int rows, int cols, Rng& rng);

}  // namespace sni
