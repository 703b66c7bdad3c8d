#pragma once

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Dense>

namespace sni::ad {

using Mat = Eigen::MatrixXd;

// One node of a dynamically built computation graph. Nodes are owned by the
// Graph that created them; backward closures hold raw parents, so a Graph
// must outlive every Var that points into it.
struct Node {
  Mat value;
  Mat grad;  // lazily allocated; empty until a gradient arrives
  bool needs_grad = false;
  bool grad_seen = false;
  std::function<void()> backward;
};

class Var {
 public:
  Var() = default;
  explicit Var(Node* n) : n_(n) {}

  const Mat& value() const { return n_->value; }
  // Empty matrix if no gradient reached this node.
  const Mat& grad() const { return n_->grad; }
  int rows() const { return static_cast<int>(n_->value.rows()); }
  int cols() const { return static_cast<int>(n_->value.cols()); }
  Node* node() const { return n_; }
  bool valid() const { return n_ != nullptr; }

 private:
  Node* n_ = nullptr;
};

// Tape-style reverse-mode engine over dense matrices. Creation order is a
// topological order, so backward() is a single reverse sweep.
class Graph {
 public:
  Var constant(Mat v);
  Var leaf(Mat v);  // differentiable input / parameter

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var add_rowvec(Var a, Var rv);        // rv is 1 x C, broadcast over rows
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var rsub_scalar(double s, Var a);      // s - a elementwise
  Var relu(Var a);
  Var softplus(Var a);
  Var log_elem(Var a);
  Var pow_const(Var a, double p);
  Var softmax_rows(Var a);
  Var layer_norm_rows(Var a, Var gain, Var bias);  // gain/bias are 1 x C
  Var mean_all(Var a);                   // 1 x 1
  Var sum_all(Var a);                    // 1 x 1
  Var col_mean(Var a);                   // 1 x C
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var slice_cols(Var a, int offset, int width);
  // Token-major block ops: `a` stacks T blocks of B rows each.
  Var block_mean_rows(Var a, int blocks);        // (T*B) x C -> B x C
  Var stack_col_blocks(Var a, int blocks);       // (T*B) x 1 -> B x T
  // weights: B x T, values: (T*B) x C token-major. out(b) = sum_t w(b,t) v(t*B+b).
  Var attention_pool(Var weights, Var values);

  // Seeds the (1 x 1) root with gradient 1 and sweeps the tape in reverse.
  void backward(Var root);

  size_t size() const { return nodes_.size(); }

 private:
  Var make(Mat value, bool needs_grad, std::function<void()> fn = nullptr);
  std::vector<std::unique_ptr<Node>> nodes_;
};

constexpr double kLayerNormEps = 1e-8;

}  // namespace sni::ad
