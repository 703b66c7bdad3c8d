#include "sni/autodiff.hpp"

#include <cmath>
#include <stdexcept>

namespace sni::ad {

namespace {

void accum(Node* p, const Mat& g) {
  if (!p->needs_grad) return;
  if (p->grad.size() == 0) {
    p->grad = g;
  } else {
    p->grad += g;
  }
  p->grad_seen = true;
}

double softplus_scalar(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid_scalar(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

[[noreturn]] void fail(const char* msg) { throw std::invalid_argument(msg); }

}  // namespace

Var Graph::make(Mat value, bool needs_grad, std::function<void()> fn) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  n->needs_grad = needs_grad;
  n->backward = std::move(fn);
  Node* raw = n.get();
  nodes_.push_back(std::move(n));
  return Var(raw);
}

Var Graph::constant(Mat v) { return make(std::move(v), false); }

Var Graph::leaf(Mat v) { return make(std::move(v), true); }

Var Graph::matmul(Var a, Var b) {
  if (a.cols() != b.rows()) fail("matmul: shape mismatch");
  Node* an = a.node();
  Node* bn = b.node();
  const bool ng = an->needs_grad || bn->needs_grad;
  Var out = make(an->value * bn->value, ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [an, bn, on] {
      if (an->needs_grad) accum(an, on->grad * bn->value.transpose());
      if (bn->needs_grad) accum(bn, an->value.transpose() * on->grad);
    };
  }
  return out;
}

Var Graph::add(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail("add: shape mismatch");
  Node* an = a.node();
  Node* bn = b.node();
  const bool ng = an->needs_grad || bn->needs_grad;
  Var out = make(an->value + bn->value, ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [an, bn, on] {
      accum(an, on->grad);
      accum(bn, on->grad);
    };
  }
  return out;
}

Var Graph::sub(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) fail("sub: shape mismatch");
  Node* an = a.node();
  Node* bn = b.node();
  const bool ng = an->needs_grad || bn->needs_grad;
  Var out = make(an->value - bn->value, ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [an, bn, on] {
      accum(an, on->grad);
      if (bn->needs_grad) accum(bn, -on->grad);
    };
  }
  return out;
}

Var Graph::hadamard(Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    fail("hadamard: shape mismatch");
  Node* an = a.node();
  Node* bn = b.node();
  const bool ng = an->needs_grad || bn->needs_grad;
  Var out = make(an->value.cwiseProduct(bn->value), ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [an, bn, on] {
      if (an->needs_grad) accum(an, on->grad.cwiseProduct(bn->value));
      if (bn->needs_grad) accum(bn, on->grad.cwiseProduct(an->value));
    };
  }
  return out;
}

Var Graph::add_rowvec(Var a, Var rv) {
  if (rv.rows() != 1 || rv.cols() != a.cols())
    fail("add_rowvec: shape mismatch");
  Node* an = a.node();
  Node* rn = rv.node();
  const bool ng = an->needs_grad || rn->needs_grad;
  Mat v = an->value;
  v.rowwise() += rn->value.row(0);
  Var out = make(std::move(v), ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [an, rn, on] {
      accum(an, on->grad);
      if (rn->needs_grad) accum(rn, on->grad.colwise().sum());
    };
  }
  return out;
}

Var Graph::scale(Var a, double s) {
  Node* an = a.node();
  Var out = make(an->value * s, an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on, s] { accum(an, on->grad * s); };
  }
  return out;
}

Var Graph::add_scalar(Var a, double s) {
  Node* an = a.node();
  Var out = make((an->value.array() + s).matrix(), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on] { accum(an, on->grad); };
  }
  return out;
}

Var Graph::rsub_scalar(double s, Var a) {
  Node* an = a.node();
  Var out = make((s - an->value.array()).matrix(), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on] { accum(an, -on->grad); };
  }
  return out;
}

Var Graph::relu(Var a) {
  Node* an = a.node();
  Var out = make(an->value.cwiseMax(0.0), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on] {
      accum(an, on->grad.cwiseProduct(
                    (an->value.array() > 0.0).cast<double>().matrix()));
    };
  }
  return out;
}

Var Graph::softplus(Var a) {
  Node* an = a.node();
  Mat v = an->value.unaryExpr([](double x) { return softplus_scalar(x); });
  Var out = make(std::move(v), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on] {
      accum(an, on->grad.cwiseProduct(an->value.unaryExpr(
                    [](double x) { return sigmoid_scalar(x); })));
    };
  }
  return out;
}

Var Graph::log_elem(Var a) {
  Node* an = a.node();
  Var out = make(an->value.array().log().matrix(), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on] {
      accum(an, (on->grad.array() / an->value.array()).matrix());
    };
  }
  return out;
}

Var Graph::pow_const(Var a, double p) {
  Node* an = a.node();
  Mat v;
  if (p == 0.0) {
    v = Mat::Ones(a.rows(), a.cols());
  } else if (p == 1.0) {
    v = an->value;
  } else if (p == 2.0) {
    v = an->value.cwiseProduct(an->value);
  } else {
    v = an->value.array().pow(p).matrix();
  }
  const bool ng = an->needs_grad && p != 0.0;
  Var out = make(std::move(v), ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [an, on, p] {
      Mat d;
      if (p == 1.0) {
        d = on->grad;
      } else if (p == 2.0) {
        d = 2.0 * on->grad.cwiseProduct(an->value);
      } else {
        d = p * on->grad.cwiseProduct(an->value.array().pow(p - 1.0).matrix());
      }
      accum(an, d);
    };
  }
  return out;
}

Var Graph::softmax_rows(Var a) {
  Node* an = a.node();
  Mat v = an->value;
  for (int r = 0; r < v.rows(); ++r) {
    const double mx = v.row(r).maxCoeff();
    v.row(r) = (v.row(r).array() - mx).exp().matrix();
    v.row(r) /= v.row(r).sum();
  }
  Var out = make(std::move(v), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on] {
      const Mat& p = on->value;
      Mat d = on->grad.cwiseProduct(p);
      const Eigen::VectorXd row_dot = d.rowwise().sum();
      d -= p.cwiseProduct(row_dot * Eigen::RowVectorXd::Ones(p.cols()));
      accum(an, d);
    };
  }
  return out;
}

Var Graph::layer_norm_rows(Var a, Var gain, Var bias) {
  if (gain.rows() != 1 || gain.cols() != a.cols() || bias.rows() != 1 ||
      bias.cols() != a.cols())
    fail("layer_norm_rows: affine shape mismatch");
  Node* an = a.node();
  Node* gn = gain.node();
  Node* bn = bias.node();
  const int R = a.rows();
  const int C = a.cols();

  // Population variance per row; eps keeps the inverse bounded.
  auto y = std::make_shared<Mat>(R, C);
  auto inv_sd = std::make_shared<Eigen::VectorXd>(R);
  for (int r = 0; r < R; ++r) {
    const double mu = an->value.row(r).mean();
    Eigen::RowVectorXd c = an->value.row(r);
    c.array() -= mu;
    const double var = c.squaredNorm() / C;
    const double isd = 1.0 / std::sqrt(var + kLayerNormEps);
    (*inv_sd)(r) = isd;
    y->row(r) = c * isd;
  }
  Mat v = y->cwiseProduct(Eigen::VectorXd::Ones(R) * gn->value.row(0));
  v.rowwise() += bn->value.row(0);

  const bool ng = an->needs_grad || gn->needs_grad || bn->needs_grad;
  Var out = make(std::move(v), ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [an, gn, bn, on, y, inv_sd] {
      const Mat& G = on->grad;
      if (bn->needs_grad) accum(bn, G.colwise().sum());
      if (gn->needs_grad) accum(gn, G.cwiseProduct(*y).colwise().sum());
      if (an->needs_grad) {
        const int R = static_cast<int>(G.rows());
        const int C = static_cast<int>(G.cols());
        Mat dx(R, C);
        for (int r = 0; r < R; ++r) {
          const Eigen::RowVectorXd dy =
              G.row(r).cwiseProduct(gn->value.row(0));
          const double m1 = dy.mean();
          const double m2 = dy.cwiseProduct(y->row(r)).mean();
          dx.row(r) = (((dy.array() - m1) - y->row(r).array() * m2) *
                       (*inv_sd)(r))
                          .matrix();
        }
        accum(an, dx);
      }
    };
  }
  return out;
}

Var Graph::mean_all(Var a) {
  Node* an = a.node();
  Mat v(1, 1);
  v(0, 0) = an->value.mean();
  Var out = make(std::move(v), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on] {
      const double g = on->grad(0, 0) / static_cast<double>(an->value.size());
      accum(an, Mat::Constant(an->value.rows(), an->value.cols(), g));
    };
  }
  return out;
}

Var Graph::sum_all(Var a) {
  Node* an = a.node();
  Mat v(1, 1);
  v(0, 0) = an->value.sum();
  Var out = make(std::move(v), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on] {
      accum(an,
            Mat::Constant(an->value.rows(), an->value.cols(), on->grad(0, 0)));
    };
  }
  return out;
}

Var Graph::col_mean(Var a) {
  Node* an = a.node();
  Var out = make(an->value.colwise().mean(), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on] {
      const double inv = 1.0 / static_cast<double>(an->value.rows());
      accum(an, Eigen::VectorXd::Constant(an->value.rows(), inv) *
                    on->grad.row(0));
    };
  }
  return out;
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) fail("concat_rows: no parts");
  const int C = parts.front().cols();
  int R = 0;
  bool ng = false;
  for (const Var& p : parts) {
    if (p.cols() != C) fail("concat_rows: column mismatch");
    R += p.rows();
    ng = ng || p.node()->needs_grad;
  }
  Mat v(R, C);
  int at = 0;
  std::vector<Node*> src;
  src.reserve(parts.size());
  for (const Var& p : parts) {
    v.middleRows(at, p.rows()) = p.value();
    at += p.rows();
    src.push_back(p.node());
  }
  Var out = make(std::move(v), ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [src, on] {
      int at = 0;
      for (Node* p : src) {
        const int r = static_cast<int>(p->value.rows());
        accum(p, on->grad.middleRows(at, r));
        at += r;
      }
    };
  }
  return out;
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) fail("concat_cols: no parts");
  const int R = parts.front().rows();
  int C = 0;
  bool ng = false;
  for (const Var& p : parts) {
    if (p.rows() != R) fail("concat_cols: row mismatch");
    C += p.cols();
    ng = ng || p.node()->needs_grad;
  }
  Mat v(R, C);
  int at = 0;
  std::vector<Node*> src;
  src.reserve(parts.size());
  for (const Var& p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
    src.push_back(p.node());
  }
  Var out = make(std::move(v), ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [src, on] {
      int at = 0;
      for (Node* p : src) {
        const int c = static_cast<int>(p->value.cols());
        accum(p, on->grad.middleCols(at, c));
        at += c;
      }
    };
  }
  return out;
}

Var Graph::slice_cols(Var a, int offset, int width) {
  if (offset < 0 || width < 1 || offset + width > a.cols())
    fail("slice_cols: range out of bounds");
  Node* an = a.node();
  Var out = make(an->value.middleCols(offset, width), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on, offset, width] {
      Mat g = Mat::Zero(an->value.rows(), an->value.cols());
      g.middleCols(offset, width) = on->grad;
      accum(an, g);
    };
  }
  return out;
}

Var Graph::block_mean_rows(Var a, int blocks) {
  if (blocks < 1 || a.rows() % blocks != 0)
    fail("block_mean_rows: row count not divisible by block count");
  Node* an = a.node();
  const int B = a.rows() / blocks;
  Mat v = Mat::Zero(B, a.cols());
  for (int t = 0; t < blocks; ++t) v += an->value.middleRows(t * B, B);
  v /= static_cast<double>(blocks);
  Var out = make(std::move(v), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on, blocks, B] {
      Mat g(an->value.rows(), an->value.cols());
      const Mat part = on->grad / static_cast<double>(blocks);
      for (int t = 0; t < blocks; ++t) g.middleRows(t * B, B) = part;
      accum(an, g);
    };
  }
  return out;
}

Var Graph::stack_col_blocks(Var a, int blocks) {
  if (a.cols() != 1 || blocks < 1 || a.rows() % blocks != 0)
    fail("stack_col_blocks: expects a (T*B) x 1 input");
  Node* an = a.node();
  const int B = a.rows() / blocks;
  Mat v(B, blocks);
  for (int t = 0; t < blocks; ++t) v.col(t) = an->value.middleRows(t * B, B);
  Var out = make(std::move(v), an->needs_grad);
  if (an->needs_grad) {
    Node* on = out.node();
    on->backward = [an, on, blocks, B] {
      Mat g(an->value.rows(), 1);
      for (int t = 0; t < blocks; ++t)
        g.middleRows(t * B, B) = on->grad.col(t);
      accum(an, g);
    };
  }
  return out;
}

Var Graph::attention_pool(Var weights, Var values) {
  const int B = weights.rows();
  const int T = weights.cols();
  if (values.rows() != static_cast<int64_t>(B) * T)
    fail("attention_pool: token-major value rows must equal B*T");
  Node* wn = weights.node();
  Node* vn = values.node();
  const int C = values.cols();
  Mat v = Mat::Zero(B, C);
  for (int t = 0; t < T; ++t)
    v += wn->value.col(t).asDiagonal() * vn->value.middleRows(t * B, B);
  const bool ng = wn->needs_grad || vn->needs_grad;
  Var out = make(std::move(v), ng);
  if (ng) {
    Node* on = out.node();
    on->backward = [wn, vn, on, B, T] {
      if (wn->needs_grad) {
        Mat gw(B, T);
        for (int t = 0; t < T; ++t)
          gw.col(t) = on->grad
                          .cwiseProduct(vn->value.middleRows(t * B, B))
                          .rowwise()
                          .sum();
        accum(wn, gw);
      }
      if (vn->needs_grad) {
        Mat gv(vn->value.rows(), vn->value.cols());
        for (int t = 0; t < T; ++t)
          gv.middleRows(t * B, B) =
              wn->value.col(t).asDiagonal() * on->grad;
        accum(vn, gv);
      }
    };
  }
  return out;
}

void Graph::backward(Var root) {
  Node* rn = root.node();
  if (rn->value.rows() != 1 || rn->value.cols() != 1)
    fail("backward: root must be scalar");
  if (!rn->needs_grad) fail("backward: root does not require gradients");
  rn->grad = Mat::Ones(1, 1);
  rn->grad_seen = true;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    Node* n = it->get();
    if (n->grad_seen && n->backward) n->backward();
  }
}

}  // namespace sni::ad
