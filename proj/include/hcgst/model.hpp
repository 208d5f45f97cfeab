// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "hcgst/graph.hpp"
#include "hcgst/homophily.hpp"

namespace hcgst {

/// Two-layer normalized message-passing extractor followed by two
/// independent linear heads over the same representation:
///   H1 = relu(S X W1 + b1),  H2 = S H1 W2 + b2
///   logits = H2 Wm + bm      (main head, used for inference)
///   pseudo = H2 Wp + bp      (pseudo head, training only)
/// where S is the self-loop augmented symmetric-normalized adjacency.
struct ModelParams {
  Matrix w1;
  Eigen::RowVectorXd b1;
  Matrix w2;
  Eigen::RowVectorXd b2;
  Matrix main_w;
  Eigen::RowVectorXd main_b;
  Matrix pseudo_w;
  Eigen::RowVectorXd pseudo_b;
  std::uint64_t seed = 0;

  Eigen::Index input_dim() const noexcept { return w1.rows(); }
  Eigen::Index hidden() const noexcept { return w1.cols(); }
  Eigen::Index num_classes() const noexcept { return main_w.cols(); }

  bool all_finite() const;
  /// Visits every parameter block in the checkpoint order.
  template <typename F>
  void for_each_block(F&& f) {
    f(w1); f(b1); f(w2); f(b2); f(main_w); f(main_b); f(pseudo_w); f(pseudo_b);
  }
  template <typename F>
  void for_each_block(F&& f) const {
    f(w1); f(b1); f(w2); f(b2); f(main_w); f(main_b); f(pseudo_w); f(pseudo_b);
  }
};

/// Deterministic scaled-uniform (Glorot) weights, zero biases.
ModelParams init_params(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index num_classes,
                        std::uint64_t seed);

struct ForwardOutput {
  Matrix hidden;         ///< H2, n x hidden
  Matrix logits;         ///< main head, n x c
  Matrix soft;           ///< row softmax of logits
  Matrix pseudo_logits;  ///< pseudo head, n x c
};

ForwardOutput forward(const ModelParams& params, const AdjacencyView& adjacency,
                      const Matrix& features);

/// Row-wise max-subtracted softmax. Throws on non-finite logits.
SoftLabelMatrix soft_labels(const Matrix& logits);

/// Argmax of the main-head logits; ties go to the lowest class index.
std::vector<ClassId> predict(const ModelParams& params, const AdjacencyView& adjacency,
                             const Matrix& features);
std::vector<ClassId> argmax_rows(const Matrix& scores);

struct TrainConfig {
  int epochs = 300;
  double learning_rate = 0.001;
  double lambda_dual = 0.09;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
};

/// Nodes paired with (ground-truth or pseudo) labels.
struct LabeledNodes {
  std::vector<NodeId> nodes;
  std::vector<ClassId> labels;

  std::size_t size() const noexcept { return nodes.size(); }
  bool empty() const noexcept { return nodes.empty(); }
  void add(NodeId v, ClassId y) {
    nodes.push_back(v);
    labels.push_back(y);
  }
};

/// Objective:  CE_mean(main head on `main`) + lambda * CE_mean(pseudo head on
/// `leftover`) + weight_decay/2 * sum of squared weight matrices.
struct LossBreakdown {
  double total = 0.0;
  double main = 0.0;
  double pseudo = 0.0;
};

/// Loss and its analytic gradient (same block layout as ModelParams).
struct LossGradient {
  LossBreakdown loss;
  ModelParams grad;
};

LossBreakdown dual_loss(const ModelParams& params, const AdjacencyView& adjacency,
                        const Matrix& features, const LabeledNodes& main,
                        const LabeledNodes& leftover, double lambda_dual, double weight_decay);
LossGradient dual_loss_gradient(const ModelParams& params, const AdjacencyView& adjacency,
                                const Matrix& features, const LabeledNodes& main,
                                const LabeledNodes& leftover, double lambda_dual,
                                double weight_decay);

struct TrainResult {
  ModelParams params;
  int best_epoch = 0;
  double best_validation_accuracy = 0.0;
  std::vector<double> loss_history;  ///< objective before each update
};

/// Full-batch Adam on the dual objective. Returns the parameters of the epoch
/// with the best validation accuracy (later epochs win ties); when
/// `validation` is empty the final parameters are returned.
TrainResult train_dual(const ModelParams& initial, const AdjacencyView& adjacency,
                       const Matrix& features, const LabeledNodes& clean,
                       const LabeledNodes& consistent_pseudo, const LabeledNodes& leftover_pseudo,
                       const LabeledNodes& validation, const TrainConfig& cfg);

/// Single-head training on `labeled`; the pseudo head never changes.
TrainResult train_supervised(const ModelParams& initial, const AdjacencyView& adjacency,
                             const Matrix& features, const LabeledNodes& labeled,
                             const LabeledNodes& validation, const TrainConfig& cfg);

double accuracy(std::span<const ClassId> predictions, const LabeledNodes& truth);

/// Max relative error between analytic and central finite-difference gradients
/// of the dual objective, |a - f| / max(|a| + |f|, 1e-6), over all parameters.
double gradient_check(const ModelParams& params, const AdjacencyView& adjacency,
                      const Matrix& features, const LabeledNodes& main,
                      const LabeledNodes& leftover, double lambda_dual, double weight_decay,
                      double step = 1e-5);

/// Binary checkpoint: "HCGSTPRM", u32 version, u64 input_dim, hidden, classes,
/// seed, then little-endian f64 blocks row-major in for_each_block order.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace hcgst
