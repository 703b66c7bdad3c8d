#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "sni/nn.hpp"
#include "sni/rng.hpp"

using namespace sni;
using Eigen::MatrixXd;

TEST_SUITE("nn") {

TEST_CASE("softplus round trips and stays stable at extremes") {
  CHECK(softplus(0.0) == doctest::Approx(std::log(2.0)));
  CHECK(softplus(std::log(std::exp(1.0) - 1.0)) == doctest::Approx(1.0));
  CHECK(inverse_softplus(1.0) ==
        doctest::Approx(std::log(std::exp(1.0) - 1.0)));
  for (double y : {1e-6, 0.1, 1.0, 5.0, 30.0, 500.0})
    CHECK(softplus(inverse_softplus(y)) == doctest::Approx(y).epsilon(1e-12));
  CHECK(softplus(1000.0) == doctest::Approx(1000.0));
  CHECK(softplus(-1000.0) >= 0.0);
  CHECK(softplus(-1000.0) < 1e-300);
  CHECK_THROWS_AS(inverse_softplus(0.0), std::invalid_argument);
  CHECK_THROWS_AS(inverse_softplus(-1.0), std::invalid_argument);
}

TEST_CASE("cosine schedule hits both endpoints and decreases") {
  LrSchedule s;
  s.base_lr = 1e-3;
  s.min_lr = 1e-6;
  s.total_steps = 50;
  CHECK(cosine_lr(s, 0) == doctest::Approx(1e-3));
  CHECK(cosine_lr(s, 50) == doctest::Approx(1e-6));
  CHECK(cosine_lr(s, 25) == doctest::Approx(0.5 * (1e-3 + 1e-6)));
  double prev = cosine_lr(s, 0);
  for (int step = 1; step <= 50; ++step) {
    const double lr = cosine_lr(s, step);
    CHECK(lr < prev);
    prev = lr;
  }
  CHECK_THROWS_AS(cosine_lr(s, -1), std::invalid_argument);
  CHECK_THROWS_AS(cosine_lr(s, 51), std::invalid_argument);
  LrSchedule bad = s;
  bad.total_steps = 0;
  CHECK_THROWS_AS(cosine_lr(bad, 0), std::invalid_argument);
}

TEST_CASE("adamw first step matches the closed form") {
  // p = 1, g = 1, lr = 0.1: m_hat = v_hat = 1 after bias correction, so the
  // update is lr / (1 + eps) regardless of decay.
  MatrixXd p = MatrixXd::Constant(1, 1, 1.0);
  MatrixXd g = MatrixXd::Constant(1, 1, 1.0);
  AdamW opt(/*weight_decay=*/0.0);
  opt.init({&p});
  opt.step({&p}, {&g}, 0.1);
  CHECK(p(0, 0) == doctest::Approx(1.0 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
  CHECK(opt.step_count() == 1);

  MatrixXd q = MatrixXd::Constant(1, 1, 1.0);
  AdamW decayed(/*weight_decay=*/0.01);
  decayed.init({&q});
  decayed.step({&q}, {&g}, 0.1);
  CHECK(q(0, 0) ==
        doctest::Approx(1.0 - 0.001 - 0.1 / (1.0 + 1e-8)).epsilon(1e-14));
}

TEST_CASE("constant gradients give constant bias-corrected updates") {
  MatrixXd p = MatrixXd::Constant(1, 1, 1.0);
  MatrixXd g = MatrixXd::Constant(1, 1, 1.0);
  AdamW opt(0.0);
  opt.init({&p});
  const double update = 0.1 / (1.0 + 1e-8);
  for (int k = 1; k <= 3; ++k) {
    opt.step({&p}, {&g}, 0.1);
    CHECK(p(0, 0) == doctest::Approx(1.0 - k * update).epsilon(1e-12));
  }
}

TEST_CASE("empty gradient leaves the adam update at zero") {
  MatrixXd p = MatrixXd::Constant(1, 1, 1.0);
  MatrixXd empty;
  AdamW opt(/*weight_decay=*/0.5);
  opt.init({&p});
  opt.step({&p}, {&empty}, 0.1);
  CHECK(p(0, 0) == doctest::Approx(0.95));  // only decoupled decay applies
  opt.step({&p}, {nullptr}, 0.1);
  CHECK(p(0, 0) == doctest::Approx(0.95 * 0.95));
}

TEST_CASE("adamw drives a quadratic toward its minimum") {
  MatrixXd p = MatrixXd::Constant(2, 2, 4.0);
  AdamW opt(0.0);
  opt.init({&p});
  for (int step = 0; step < 400; ++step) {
    MatrixXd g = p;  // gradient of 0.5 * ||p||^2
    opt.step({&p}, {&g}, 0.05);
  }
  CHECK(p.cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("adamw tracks several tensors in registration order") {
  MatrixXd a = MatrixXd::Constant(1, 2, 1.0);
  MatrixXd b = MatrixXd::Constant(2, 1, 1.0);
  MatrixXd ga = MatrixXd::Constant(1, 2, 1.0);
  MatrixXd gb = MatrixXd::Constant(2, 1, -1.0);
  AdamW opt(0.0);
  opt.init({&a, &b});
  opt.step({&a, &b}, {&ga, &gb}, 0.1);
  CHECK(a(0, 0) < 1.0);
  CHECK(b(0, 0) > 1.0);  // negative gradient moves it up

  MatrixXd bad = MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(opt.step({&a, &b}, {&bad, &gb}, 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(opt.step({&a}, {&ga}, 0.1), std::invalid_argument);
}

TEST_CASE("glorot init respects fan-based bounds") {
  Rng rng(42);
  const int rows = 30, cols = 20;
  const MatrixXd m = glorot_uniform(rows, cols, rng);
  const double bound = std::sqrt(6.0 / (rows + cols));
  CHECK(m.maxCoeff() <= bound);
  CHECK(m.minCoeff() >= -bound);
  CHECK(m.maxCoeff() > 0.5 * bound);   // actually spreads out
  CHECK(m.minCoeff() < -0.5 * bound);
  CHECK(std::abs(m.mean()) < 0.05);

  Rng again(42);
  const MatrixXd m2 = glorot_uniform(rows, cols, again);
  CHECK((m - m2).cwiseAbs().maxCoeff() == 0.0);
}

}  // TEST_SUITE
