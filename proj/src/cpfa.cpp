#include "sni/cpfa.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace sni {

namespace {

using Mat = Eigen::MatrixXd;

[[noreturn]] void fail(const std::string& msg) {
  throw std::invalid_argument(msg);
}

template <typename Model, typename Ptr>
std::vector<Ptr> collect_params(Model& m) {
  std::vector<Ptr> out;
  for (auto& w : m.value_w) out.push_back(&w);
  for (auto& w : m.pos) out.push_back(&w);
  for (auto& w : m.key_w) out.push_back(&w);
  for (auto& w : m.val_w) out.push_back(&w);
  for (auto& w : m.query) out.push_back(&w);
  out.push_back(&m.out_w);
  out.push_back(&m.out_b);
  out.push_back(&m.ln_gain);
  out.push_back(&m.ln_bias);
  for (size_t i = 0; i < m.ffn_w.size(); ++i) {
    out.push_back(&m.ffn_w[i]);
    out.push_back(&m.ffn_b[i]);
  }
  out.push_back(&m.bypass_w);
  out.push_back(&m.bypass_b);
  out.push_back(&m.pred_w);
  out.push_back(&m.pred_b);
  out.push_back(&m.theta_lambda);
  return out;
}

}  // namespace

void CpfaConfig::validate() const {
  if (heads < 1) fail("cpfa config: heads must be >= 1");
  if (embed_dim < 1) fail("cpfa config: embed_dim must be >= 1");
  if (embed_dim % heads != 0)
    fail("cpfa config: embed_dim must be divisible by heads");
  for (int h : hidden_dims)
    if (h < 1) fail("cpfa config: hidden dims must be positive");
  if (!(lr > 0.0) || !(min_lr >= 0.0) || min_lr > lr)
    fail("cpfa config: invalid learning rates");
  if (batch < 1) fail("cpfa config: batch must be >= 1");
  if (max_epochs < 1) fail("cpfa config: max_epochs must be >= 1");
  if (patience < 1) fail("cpfa config: patience must be >= 1");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0)
    fail("cpfa config: label_smoothing must be in [0, 1)");
  if (focal_gamma < 0.0) fail("cpfa config: focal_gamma must be >= 0");
  if (prior_weight < 0.0) fail("cpfa config: prior_weight must be >= 0");
  if (weight_decay < 0.0) fail("cpfa config: weight_decay must be >= 0");
}

std::vector<Eigen::MatrixXd*> CpfaModel::params() {
  return collect_params<CpfaModel, Eigen::MatrixXd*>(*this);
}

std::vector<const Eigen::MatrixXd*> CpfaModel::params() const {
  return collect_params<const CpfaModel, const Eigen::MatrixXd*>(*this);
}

std::vector<double> CpfaModel::lambdas() const {
  std::vector<double> out(static_cast<size_t>(config.heads));
  for (int h = 0; h < config.heads; ++h)
    out[static_cast<size_t>(h)] = softplus(theta_lambda(0, h));
  return out;
}

CpfaModel make_cpfa_model(const CpfaConfig& cfg,
                          const std::vector<TokenSpec>& tokens,
                          int feature_tokens, int input_width,
                          bool classification, int n_classes, Rng& rng) {
  cfg.validate();
  if (tokens.empty()) fail("cpfa model: no source tokens");
  if (feature_tokens < 1 || feature_tokens > static_cast<int>(tokens.size()))
    fail("cpfa model: invalid feature token count");
  for (const TokenSpec& t : tokens)
    if (t.offset < 0 || t.width < 1 || t.offset + t.width > input_width)
      fail("cpfa model: token span outside input");
  if (classification && n_classes < 2)
    fail("cpfa model: classification needs >= 2 classes");

  CpfaModel m;
  m.config = cfg;
  m.tokens = tokens;
  m.feature_tokens = feature_tokens;
  m.input_width = input_width;
  m.classification = classification;
  m.n_classes = classification ? n_classes : 1;
  m.dk = cfg.embed_dim / cfg.heads;

  const int E = cfg.embed_dim;
  for (const TokenSpec& t : tokens) {
    m.value_w.push_back(glorot_uniform(t.width, E, rng));
    m.pos.push_back(glorot_uniform(1, E, rng));
  }
  for (int h = 0; h < cfg.heads; ++h) {
    m.key_w.push_back(glorot_uniform(E, m.dk, rng));
    m.val_w.push_back(glorot_uniform(E, m.dk, rng));
    m.query.push_back(glorot_uniform(m.dk, 1, rng));
  }
  m.out_w = glorot_uniform(cfg.heads * m.dk, E, rng);
  m.out_b = Mat::Zero(1, E);
  m.ln_gain = Mat::Ones(1, E);
  m.ln_bias = Mat::Zero(1, E);
  int in_dim = E;
  for (int hdim : cfg.hidden_dims) {
    m.ffn_w.push_back(glorot_uniform(in_dim, hdim, rng));
    m.ffn_b.push_back(Mat::Zero(1, hdim));
    in_dim = hdim;
  }
  m.bypass_w = glorot_uniform(input_width, in_dim, rng);
  m.bypass_b = Mat::Zero(1, in_dim);
  const int out_dim = classification ? n_classes : 1;
  m.pred_w = glorot_uniform(in_dim, out_dim, rng);
  m.pred_b = Mat::Zero(1, out_dim);
  m.theta_lambda = Mat::Constant(1, cfg.heads, inverse_softplus(1.0));
  return m;
}

CpfaForward cpfa_forward(ad::Graph& g, const CpfaModel& m,
                         const Eigen::MatrixXd& batch) {
  if (batch.cols() != m.input_width)
    fail("cpfa_forward: input width mismatch");
  if (batch.rows() < 1) fail("cpfa_forward: empty batch");

  CpfaForward fwd;
  for (const Mat* p : m.params()) fwd.param_leaves.push_back(g.leaf(*p));
  size_t at = 0;
  auto next = [&] { return fwd.param_leaves[at++]; };

  const int T = static_cast<int>(m.tokens.size());
  const int H = m.config.heads;
  std::vector<ad::Var> value_w(static_cast<size_t>(T)),
      pos(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) value_w[static_cast<size_t>(t)] = next();
  for (int t = 0; t < T; ++t) pos[static_cast<size_t>(t)] = next();
  std::vector<ad::Var> key_w(static_cast<size_t>(H)),
      val_w(static_cast<size_t>(H)), query(static_cast<size_t>(H));
  for (int h = 0; h < H; ++h) key_w[static_cast<size_t>(h)] = next();
  for (int h = 0; h < H; ++h) val_w[static_cast<size_t>(h)] = next();
  for (int h = 0; h < H; ++h) query[static_cast<size_t>(h)] = next();
  const ad::Var out_w = next(), out_b = next();
  const ad::Var ln_gain = next(), ln_bias = next();
  std::vector<ad::Var> ffn_w, ffn_b;
  for (size_t i = 0; i < m.ffn_w.size(); ++i) {
    ffn_w.push_back(next());
    ffn_b.push_back(next());
  }
  const ad::Var bypass_w = next(), bypass_b = next();
  const ad::Var pred_w = next(), pred_b = next();
  const ad::Var theta = next();

  const ad::Var x = g.constant(batch);

  // Token-major embedding stack: rows [t*B, (t+1)*B) hold token t.
  std::vector<ad::Var> token_embeds;
  token_embeds.reserve(static_cast<size_t>(T));
  for (int t = 0; t < T; ++t) {
    const TokenSpec& spec = m.tokens[static_cast<size_t>(t)];
    ad::Var raw = g.slice_cols(x, spec.offset, spec.width);
    ad::Var emb = g.matmul(raw, value_w[static_cast<size_t>(t)]);
    token_embeds.push_back(g.add_rowvec(emb, pos[static_cast<size_t>(t)]));
  }
  const ad::Var tokens_mat = g.concat_rows(token_embeds);

  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(m.dk));
  std::vector<ad::Var> head_outs;
  head_outs.reserve(static_cast<size_t>(H));
  for (int h = 0; h < H; ++h) {
    const ad::Var k = g.matmul(tokens_mat, key_w[static_cast<size_t>(h)]);
    const ad::Var scores =
        g.scale(g.matmul(k, query[static_cast<size_t>(h)]), inv_sqrt_dk);
    const ad::Var a = g.softmax_rows(g.stack_col_blocks(scores, T));
    const ad::Var v = g.matmul(tokens_mat, val_w[static_cast<size_t>(h)]);
    head_outs.push_back(g.attention_pool(a, v));
    fwd.attention.push_back(a);
    fwd.head_means.push_back(g.col_mean(a));
  }

  const ad::Var attn_out =
      g.add_rowvec(g.matmul(g.concat_cols(head_outs), out_w), out_b);
  const ad::Var pooled_in = g.block_mean_rows(tokens_mat, T);
  ad::Var f = g.layer_norm_rows(g.add(pooled_in, attn_out), ln_gain, ln_bias);
  for (size_t i = 0; i < ffn_w.size(); ++i)
    f = g.relu(g.add_rowvec(g.matmul(f, ffn_w[i]), ffn_b[i]));
  const ad::Var bypass = g.add_rowvec(g.matmul(x, bypass_w), bypass_b);
  fwd.output = g.add_rowvec(g.matmul(g.add(f, bypass), pred_w), pred_b);
  fwd.lambdas = g.softplus(theta);
  return fwd;
}

ad::Var recon_loss_regression(ad::Graph& g, ad::Var pred,
                              const Eigen::VectorXd& target) {
  if (pred.cols() != 1 || pred.rows() != target.size())
    fail("recon_loss_regression: shape mismatch");
  const ad::Var y = g.constant(target);
  const ad::Var diff = g.sub(pred, y);
  return g.mean_all(g.hadamard(diff, diff));
}

ad::Var recon_loss_classification(ad::Graph& g, ad::Var logits,
                                  const std::vector<int>& labels,
                                  double focal_gamma, double label_smoothing) {
  const int B = logits.rows();
  const int K = logits.cols();
  if (static_cast<int>(labels.size()) != B)
    fail("recon_loss_classification: label count mismatch");
  Mat target(B, K);
  target.setConstant(label_smoothing / K);
  for (int i = 0; i < B; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    if (y < 0 || y >= K) fail("recon_loss_classification: label out of range");
    target(i, y) += 1.0 - label_smoothing;
  }
  const ad::Var p = g.softmax_rows(logits);
  const ad::Var focal = g.pow_const(g.rsub_scalar(1.0, p), focal_gamma);
  const ad::Var nll = g.scale(g.log_elem(p), -1.0);
  const ad::Var weighted =
      g.hadamard(g.constant(target), g.hadamard(focal, nll));
  return g.scale(g.sum_all(weighted), 1.0 / B);
}

ad::Var prior_penalty(ad::Graph& g, const std::vector<ad::Var>& head_means,
                      int feature_tokens, const PriorVector& prior,
                      ad::Var lambdas, double alpha) {
  if (head_means.empty()) fail("prior_penalty: no heads");
  if (static_cast<int>(prior.weights.size()) != feature_tokens)
    fail("prior_penalty: prior length must equal feature token count");
  if (lambdas.cols() != static_cast<int>(head_means.size()))
    fail("prior_penalty: lambda/head count mismatch");
  Mat p_row(1, feature_tokens);
  for (int i = 0; i < feature_tokens; ++i)
    p_row(0, i) = prior.weights[static_cast<size_t>(i)];
  const ad::Var p_const = g.constant(p_row);

  ad::Var acc;
  for (size_t h = 0; h < head_means.size(); ++h) {
    ad::Var abar = head_means[h];
    if (abar.cols() != feature_tokens)
      abar = g.slice_cols(abar, 0, feature_tokens);
    const ad::Var diff = g.sub(abar, p_const);
    const ad::Var sq = g.sum_all(g.hadamard(diff, diff));
    const ad::Var term =
        g.hadamard(g.slice_cols(lambdas, static_cast<int>(h), 1), sq);
    acc = acc.valid() ? g.add(acc, term) : term;
  }
  return g.scale(acc, alpha);
}

ad::Var gamma_regularizer(ad::Graph& g, ad::Var lambdas, double a, double b) {
  const ad::Var neg_log = g.scale(g.log_elem(lambdas), -(a - 1.0));
  const ad::Var linear = g.scale(lambdas, b);
  return g.sum_all(g.add(neg_log, linear));
}

std::pair<double, double> gamma_anneal(int epoch, double lambda0) {
  if (lambda0 <= 0.0) fail("gamma_anneal: lambda0 must be positive");
  const double t = std::min(epoch, 10) / 10.0;
  const double a = 0.5 + t * (2.0 - 0.5);
  const double b = 0.5 + t * (2.0 / lambda0 - 0.5);
  return {a, b};
}

namespace {

struct BatchLoss {
  LossBreakdown breakdown;
  std::vector<const Mat*> grads;  // aliases graph leaf grads
};

LossBreakdown eval_losses(ad::Graph& g, CpfaForward& fwd, const CpfaModel& m,
                          const Eigen::VectorXd& targets,
                          const PriorVector& prior, double gamma_a,
                          double gamma_b, bool with_backward) {
  ad::Var recon;
  if (m.classification) {
    std::vector<int> labels(static_cast<size_t>(targets.size()));
    for (int i = 0; i < targets.size(); ++i)
      labels[static_cast<size_t>(i)] =
          static_cast<int>(std::llround(targets(i)));
    recon = recon_loss_classification(g, fwd.output, labels,
                                      m.config.focal_gamma,
                                      m.config.label_smoothing);
  } else {
    recon = recon_loss_regression(g, fwd.output, targets);
  }
  const ad::Var prior_term =
      prior_penalty(g, fwd.head_means, m.feature_tokens, prior, fwd.lambdas,
                    m.config.prior_weight);
  ad::Var gamma_term;
  if (m.config.gamma_prior_enabled) {
    gamma_term = gamma_regularizer(g, fwd.lambdas, gamma_a, gamma_b);
  } else {
    gamma_term = g.scale(g.sum_all(fwd.lambdas), 0.0);
  }
  const ad::Var total = g.add(recon, g.add(prior_term, gamma_term));
  if (with_backward) g.backward(total);

  LossBreakdown out;
  out.recon = recon.value()(0, 0);
  out.prior = prior_term.value()(0, 0);
  out.gamma_reg = gamma_term.value()(0, 0);
  out.total = total.value()(0, 0);
  return out;
}

Mat gather_rows(const Mat& src, const std::vector<int>& order, size_t begin,
                size_t end) {
  Mat out(static_cast<int>(end - begin), src.cols());
  for (size_t i = begin; i < end; ++i)
    out.row(static_cast<int>(i - begin)) =
        src.row(order[i]);
  return out;
}

Eigen::VectorXd gather_vec(const Eigen::VectorXd& src,
                           const std::vector<int>& order, size_t begin,
                           size_t end) {
  Eigen::VectorXd out(static_cast<int>(end - begin));
  for (size_t i = begin; i < end; ++i)
    out(static_cast<int>(i - begin)) = src(order[i]);
  return out;
}

}  // namespace

double validation_recon(const CpfaModel& m, const Eigen::MatrixXd& inputs,
                        const Eigen::VectorXd& targets) {
  if (inputs.rows() == 0) fail("validation_recon: empty input");
  ad::Graph g;
  CpfaForward fwd = cpfa_forward(g, m, inputs);
  if (m.classification) {
    std::vector<int> labels(static_cast<size_t>(targets.size()));
    for (int i = 0; i < targets.size(); ++i)
      labels[static_cast<size_t>(i)] =
          static_cast<int>(std::llround(targets(i)));
    return recon_loss_classification(g, fwd.output, labels,
                                     m.config.focal_gamma,
                                     m.config.label_smoothing)
        .value()(0, 0);
  }
  return recon_loss_regression(g, fwd.output, targets).value()(0, 0);
}

TrainResult train_feature(CpfaModel model, const FeatureDataset& data,
                          const PriorVector& prior, uint64_t seed) {
  model.config.validate();
  const int n_train = static_cast<int>(data.train_inputs.rows());
  const int n_val = static_cast<int>(data.val_inputs.rows());
  if (n_train < 1) fail("train_feature: empty training set");
  if (n_val < 1) fail("train_feature: empty validation set");
  if (data.train_targets.size() != n_train ||
      data.val_targets.size() != n_val)
    fail("train_feature: target length mismatch");
  if (data.train_inputs.cols() != model.input_width ||
      data.val_inputs.cols() != model.input_width)
    fail("train_feature: input width mismatch");

  const CpfaConfig& cfg = model.config;
  std::vector<Mat*> params = model.params();
  AdamW opt(cfg.weight_decay);
  opt.init(params);
  const LrSchedule schedule{cfg.lr, cfg.min_lr, cfg.max_epochs};

  const std::vector<double> lam0 = model.lambdas();
  const double lambda0 =
      std::accumulate(lam0.begin(), lam0.end(), 0.0) / lam0.size();

  Rng rng(seed);
  std::vector<int> order(static_cast<size_t>(n_train));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result;
  std::vector<Mat> best_params;
  for (Mat* p : params) best_params.push_back(*p);
  result.best_val = std::numeric_limits<double>::infinity();
  int since_improve = 0;

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cosine_lr(schedule, epoch);
    auto [gamma_a, gamma_b] = gamma_anneal(epoch, lambda0);
    rng.shuffle(order);

    LossBreakdown epoch_mean;
    for (size_t begin = 0; begin < order.size();
         begin += static_cast<size_t>(cfg.batch)) {
      const size_t end =
          std::min(order.size(), begin + static_cast<size_t>(cfg.batch));
      const Mat batch = gather_rows(data.train_inputs, order, begin, end);
      const Eigen::VectorXd targets =
          gather_vec(data.train_targets, order, begin, end);

      ad::Graph g;
      CpfaForward fwd = cpfa_forward(g, model, batch);
      const LossBreakdown bl =
          eval_losses(g, fwd, model, targets, prior, gamma_a, gamma_b, true);

      std::vector<const Mat*> grads;
      grads.reserve(fwd.param_leaves.size());
      for (const ad::Var& leaf : fwd.param_leaves)
        grads.push_back(&leaf.grad());
      opt.step(params, grads, lr);

      const double w = static_cast<double>(end - begin) / n_train;
      epoch_mean.recon += w * bl.recon;
      epoch_mean.prior += w * bl.prior;
      epoch_mean.gamma_reg += w * bl.gamma_reg;
      epoch_mean.total += w * bl.total;
    }

    EpochStats stats;
    stats.train = epoch_mean;
    stats.lr = lr;
    stats.val_recon =
        validation_recon(model, data.val_inputs, data.val_targets);
    result.history.push_back(stats);
    result.lambda_trajectory.push_back(model.lambdas());

    if (stats.val_recon < result.best_val) {
      result.best_val = stats.val_recon;
      result.best_epoch = epoch;
      for (size_t i = 0; i < params.size(); ++i) best_params[i] = *params[i];
      since_improve = 0;
    } else if (++since_improve >= cfg.patience) {
      break;
    }
  }

  for (size_t i = 0; i < params.size(); ++i) *params[i] = best_params[i];
  result.model = std::move(model);
  return result;
}

Eigen::VectorXd predict_regression(const CpfaModel& m,
                                   const Eigen::MatrixXd& inputs) {
  if (m.classification) fail("predict_regression: model is categorical");
  ad::Graph g;
  CpfaForward fwd = cpfa_forward(g, m, inputs);
  return fwd.output.value().col(0);
}

std::vector<int> predict_classification(const CpfaModel& m,
                                        const Eigen::MatrixXd& inputs) {
  if (!m.classification) fail("predict_classification: model is continuous");
  ad::Graph g;
  CpfaForward fwd = cpfa_forward(g, m, inputs);
  const Mat& scores = fwd.output.value();
  std::vector<int> out(static_cast<size_t>(scores.rows()));
  for (int r = 0; r < scores.rows(); ++r) {
    int arg = 0;
    for (int c = 1; c < scores.cols(); ++c)
      if (scores(r, c) > scores(r, arg)) arg = c;
    out[static_cast<size_t>(r)] = arg;
  }
  return out;
}

Eigen::MatrixXd head_means_on(const CpfaModel& m,
                              const Eigen::MatrixXd& inputs) {
  ad::Graph g;
  CpfaForward fwd = cpfa_forward(g, m, inputs);
  Mat out(m.config.heads, static_cast<int>(m.tokens.size()));
  for (int h = 0; h < m.config.heads; ++h)
    out.row(h) = fwd.head_means[static_cast<size_t>(h)].value().row(0);
  return out;
}

}  // namespace sni
