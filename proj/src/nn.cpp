#include "sni/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace sni {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double inverse_softplus(double y) {
  if (!(y > 0.0)) throw std::invalid_argument("inverse_softplus: y must be positive");
  // log(e^y - 1), stable for large y
  return y > 20.0 ? y : std::log(std::expm1(y));
}

double cosine_lr(const LrSchedule& s, int step) {
  if (s.total_steps < 1)
    throw std::invalid_argument("cosine_lr: total_steps must be positive");
  if (step < 0 || step > s.total_steps)
    throw std::invalid_argument("cosine_lr: step out of range");
  const double frac = static_cast<double>(step) / s.total_steps;
  return s.min_lr + 0.5 * (s.base_lr - s.min_lr) * (1.0 + std::cos(M_PI * frac));
}

void AdamW::init(const std::vector<Eigen::MatrixXd*>& params) {
  m_.clear();
  v_.clear();
  step_count_ = 0;
  for (const Eigen::MatrixXd* p : params) {
    m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
}

void AdamW::step(const std::vector<Eigen::MatrixXd*>& params,
                 const std::vector<const Eigen::MatrixXd*>& grads, double lr) {
  if (params.size() != m_.size() || grads.size() != params.size())
    throw std::invalid_argument("AdamW::step: parameter list mismatch");
  ++step_count_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_count_));
  for (size_t i = 0; i < params.size(); ++i) {
    Eigen::MatrixXd& p = *params[i];
    const bool has_grad = grads[i] != nullptr && grads[i]->size() > 0;
    if (has_grad && (grads[i]->rows() != p.rows() || grads[i]->cols() != p.cols()))
      throw std::invalid_argument("AdamW::step: gradient shape mismatch");

    Eigen::MatrixXd& m = m_[i];
    Eigen::MatrixXd& v = v_[i];
    if (has_grad) {
      const Eigen::MatrixXd& g = *grads[i];
      m = beta1_ * m + (1.0 - beta1_) * g;
      v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    } else {
      m *= beta1_;
      v *= beta2_;
    }
    const Eigen::MatrixXd m_hat = m / bc1;
    const Eigen::MatrixXd v_hat = v / bc2;
    // decoupled decay, then the Adam update
    p -= lr * weight_decay_ * p;
    p -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps_)).matrix();
  }
}

Eigen::MatrixXd glorot_uniform(int rows, int cols, Rng& rng) {
  const double b = std::sqrt(6.0 / (rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-b, b);
  return m;
}

}  // namespace sni
