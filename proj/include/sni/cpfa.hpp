#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "sni/autodiff.hpp"
#include "sni/nn.hpp"
#include "sni/prior.hpp"
#include "sni/rng.hpp"

namespace sni {

struct CpfaConfig {
  int heads = 4;
  std::vector<int> hidden_dims{64, 32};
  int embed_dim = 32;
  double lr = 1e-3;
  double min_lr = 1e-6;
  int batch = 128;
  int max_epochs = 50;
  int patience = 10;
  double weight_decay = 1e-4;
  double label_smoothing = 0.1;
  double focal_gamma = 2.0;
  bool gamma_prior_enabled = true;
  double prior_weight = 1.0;  // multiplier on the attention-prior penalty

  void validate() const;
};

// One input token: a contiguous column span of the model input matrix.
// Indicator tokens carry observedness flags rather than feature values.
struct TokenSpec {
  int offset = 0;
  int width = 0;
  bool is_indicator = false;
};

struct LossBreakdown {
  double recon = 0.0;
  double prior = 0.0;
  double gamma_reg = 0.0;
  double total = 0.0;
};

struct EpochStats {
  LossBreakdown train;
  double val_recon = 0.0;
  double lr = 0.0;
};

// Attention model for a single target feature. Each source token is embedded
// (value projection + learned positional embedding); per-head scaled
// dot-product attention pools the tokens; the pooled representation passes
// through Add&Norm, a ReLU stack, and a linear predictor with a bypass path
// from the raw inputs.
struct CpfaModel {
  CpfaConfig config;
  std::vector<TokenSpec> tokens;
  int feature_tokens = 0;  // leading tokens subject to the attention prior
  int input_width = 0;
  bool classification = false;
  int n_classes = 1;
  int dk = 0;  // per-head key/value width

  std::vector<Eigen::MatrixXd> value_w;  // per token: width x E
  std::vector<Eigen::MatrixXd> pos;      // per token: 1 x E
  std::vector<Eigen::MatrixXd> key_w;    // per head: E x dk
  std::vector<Eigen::MatrixXd> val_w;    // per head: E x dk
  std::vector<Eigen::MatrixXd> query;    // per head: dk x 1
  Eigen::MatrixXd out_w, out_b;          // (H*dk) x E, 1 x E
  Eigen::MatrixXd ln_gain, ln_bias;      // 1 x E
  std::vector<Eigen::MatrixXd> ffn_w, ffn_b;
  Eigen::MatrixXd bypass_w, bypass_b;    // input_width x h_last, 1 x h_last
  Eigen::MatrixXd pred_w, pred_b;        // h_last x out_dim
  Eigen::MatrixXd theta_lambda;          // 1 x H, lambda_h = softplus(theta_h)

  std::vector<Eigen::MatrixXd*> params();
  std::vector<const Eigen::MatrixXd*> params() const;
  std::vector<double> lambdas() const;
};

// Fresh model with Glorot-uniform weights, zero biases, and theta_lambda set
// so that every head coefficient starts at softplus(theta) = 1.
CpfaModel make_cpfa_model(const CpfaConfig& cfg,
                          const std::vector<TokenSpec>& tokens,
                          int feature_tokens, int input_width,
                          bool classification, int n_classes, Rng& rng);

// Handles into one forward graph.
struct CpfaForward {
  std::vector<ad::Var> param_leaves;  // same order as CpfaModel::params()
  ad::Var output;                     // B x out_dim
  std::vector<ad::Var> attention;     // per head: B x T
  std::vector<ad::Var> head_means;    // per head: 1 x T (batch-mean rows)
  ad::Var lambdas;                    // 1 x H
};

CpfaForward cpfa_forward(ad::Graph& g, const CpfaModel& m,
                         const Eigen::MatrixXd& batch);

// Mean squared error against a column target.
ad::Var recon_loss_regression(ad::Graph& g, ad::Var pred,
                              const Eigen::VectorXd& target);

// Focal cross-entropy with label smoothing, averaged over the batch.
ad::Var recon_loss_classification(ad::Graph& g, ad::Var logits,
                                  const std::vector<int>& labels,
                                  double focal_gamma, double label_smoothing);

// alpha * sum_h lambda_h * || mean-attention_h - prior ||_2^2 over the
// feature tokens only.
ad::Var prior_penalty(ad::Graph& g, const std::vector<ad::Var>& head_means,
                      int feature_tokens, const PriorVector& prior,
                      ad::Var lambdas, double alpha);

// Hierarchical penalty sum_h [ -(a-1) log lambda_h + b lambda_h ].
ad::Var gamma_regularizer(ad::Graph& g, ad::Var lambdas, double a, double b);

// Linear anneal of (a, b) from (0.5, 0.5) at epoch 0 to (2, 2/lambda0) at
// epoch 10, held constant afterwards.
std::pair<double, double> gamma_anneal(int epoch, double lambda0);

struct FeatureDataset {
  Eigen::MatrixXd train_inputs;
  Eigen::VectorXd train_targets;  // standardized values, or labels as doubles
  Eigen::MatrixXd val_inputs;
  Eigen::VectorXd val_targets;
};

struct TrainResult {
  CpfaModel model;  // best-validation checkpoint
  std::vector<EpochStats> history;
  std::vector<std::vector<double>> lambda_trajectory;  // per epoch
  double best_val = 0.0;
  int best_epoch = -1;
};

// AdamW + cosine schedule with early stopping on validation reconstruction
// loss. The seed drives batch shuffling only.
TrainResult train_feature(CpfaModel model, const FeatureDataset& data,
                          const PriorVector& prior, uint64_t seed);

Eigen::VectorXd predict_regression(const CpfaModel& m,
                                   const Eigen::MatrixXd& inputs);
// Argmax of class scores; ties resolve to the lowest index.
std::vector<int> predict_classification(const CpfaModel& m,
                                        const Eigen::MatrixXd& inputs);
// Per-head batch-mean attention rows (H x T) evaluated on the given inputs.
Eigen::MatrixXd head_means_on(const CpfaModel& m,
                              const Eigen::MatrixXd& inputs);

double validation_recon(const CpfaModel& m, const Eigen::MatrixXd& inputs,
                        const Eigen::VectorXd& targets);

}  // namespace sni
