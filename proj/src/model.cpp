// SPDX-License-Identifier: Apache-2.0
#include "hcgst/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "hcgst/error.hpp"

namespace hcgst {
namespace {

constexpr char kCheckpointMagic[8] = {'H', 'C', 'G', 'S', 'T', 'P', 'R', 'M'};
constexpr std::uint32_t kCheckpointVersion = 1;

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void check_shapes(const ModelParams& params, const AdjacencyView& adjacency,
                  const Matrix& features) {
  if (static_cast<Eigen::Index>(adjacency.num_nodes()) != features.rows()) {
    throw InputError("adjacency has " + std::to_string(adjacency.num_nodes()) +
                     " nodes but features have " + std::to_string(features.rows()) + " rows");
  }
  if (features.cols() != params.input_dim()) {
    throw InputError("feature dimension " + std::to_string(features.cols()) +
                     " does not match model input " + std::to_string(params.input_dim()));
  }
}

void check_targets(const LabeledNodes& set, Eigen::Index n, Eigen::Index classes,
                   const char* what) {
  if (set.nodes.size() != set.labels.size()) {
    throw InputError(std::string(what) + ": node and label counts differ");
  }
  for (std::size_t i = 0; i < set.size(); ++i) {
    if (set.nodes[i] < 0 || set.nodes[i] >= n) {
      throw RecordError(std::string(what) + ": node out of range", static_cast<long long>(i));
    }
    if (set.labels[i] < 0 || set.labels[i] >= classes) {
      throw RecordError(std::string(what) + ": label out of range", static_cast<long long>(i));
    }
  }
}

LabeledNodes concat(const LabeledNodes& a, const LabeledNodes& b) {
  LabeledNodes out = a;
  out.nodes.insert(out.nodes.end(), b.nodes.begin(), b.nodes.end());
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

/// Intermediate activations kept for the backward pass.
struct Activations {
  Matrix agg_x;  // S X
  Matrix pre1;   // S X W1 + b1
  Matrix h1;     // relu(pre1)
  Matrix agg_h;  // S H1
  Matrix h2;
  Matrix logits;
  Matrix pseudo_logits;
};

Activations run_forward(const ModelParams& p, const SparseMatrix& s, const Matrix& agg_x) {
  Activations a;
  a.agg_x = agg_x;
  a.pre1 = (agg_x * p.w1).rowwise() + p.b1;
  a.h1 = a.pre1.cwiseMax(0.0);
  a.agg_h = s * a.h1;
  a.h2 = (a.agg_h * p.w2).rowwise() + p.b2;
  a.logits = (a.h2 * p.main_w).rowwise() + p.main_b;
  a.pseudo_logits = (a.h2 * p.pseudo_w).rowwise() + p.pseudo_b;
  return a;
}

/// Mean cross-entropy over `set` and, optionally, d loss / d logits.
double cross_entropy(const Matrix& logits, const LabeledNodes& set, Matrix* d_logits,
                     double scale) {
  if (set.empty()) return 0.0;
  const double inv = 1.0 / static_cast<double>(set.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto row = logits.row(set.nodes[i]);
    const double max = row.maxCoeff();
    const Eigen::RowVectorXd e = (row.array() - max).exp().matrix();
    const double z = e.sum();
    loss += -(row(set.labels[i]) - max - std::log(z));
    if (d_logits) {
      Eigen::RowVectorXd g = e / z;
      g(set.labels[i]) -= 1.0;
      d_logits->row(set.nodes[i]) += scale * inv * g;
    }
  }
  return loss * inv;
}

bool pseudo_active(const LabeledNodes& leftover, double lambda_dual) {
  return lambda_dual > 0.0 && !leftover.empty();
}

double decay_term(const ModelParams& p, bool include_pseudo) {
  double sq = p.w1.squaredNorm() + p.w2.squaredNorm() + p.main_w.squaredNorm();
  if (include_pseudo) sq += p.pseudo_w.squaredNorm();
  return 0.5 * sq;
}

LossGradient loss_gradient_impl(const ModelParams& p, const SparseMatrix& s, const Matrix& agg_x,
                                const LabeledNodes& main, const LabeledNodes& leftover,
                                double lambda_dual, double weight_decay, Activations* keep) {
  Activations a = run_forward(p, s, agg_x);
  const bool use_pseudo = pseudo_active(leftover, lambda_dual);
  const Eigen::Index n = a.logits.rows();
  const Eigen::Index c = a.logits.cols();

  LossGradient out;
  Matrix d_logits = Matrix::Zero(n, c);
  out.loss.main = cross_entropy(a.logits, main, &d_logits, 1.0);
  Matrix d_pseudo = Matrix::Zero(n, c);
  if (use_pseudo) out.loss.pseudo = cross_entropy(a.pseudo_logits, leftover, &d_pseudo, lambda_dual);
  out.loss.total = out.loss.main + (use_pseudo ? lambda_dual * out.loss.pseudo : 0.0) +
                   weight_decay * decay_term(p, use_pseudo);

  ModelParams& g = out.grad;
  g.seed = p.seed;
  g.main_w = a.h2.transpose() * d_logits + weight_decay * p.main_w;
  g.main_b = d_logits.colwise().sum();
  Matrix d_h2 = d_logits * p.main_w.transpose();
  if (use_pseudo) {
    g.pseudo_w = a.h2.transpose() * d_pseudo + weight_decay * p.pseudo_w;
    g.pseudo_b = d_pseudo.colwise().sum();
    d_h2 += d_pseudo * p.pseudo_w.transpose();
  } else {
    g.pseudo_w = Matrix::Zero(p.pseudo_w.rows(), p.pseudo_w.cols());
    g.pseudo_b = Eigen::RowVectorXd::Zero(p.pseudo_b.size());
  }
  g.w2 = a.agg_h.transpose() * d_h2 + weight_decay * p.w2;
  g.b2 = d_h2.colwise().sum();
  const Matrix d_agg_h = d_h2 * p.w2.transpose();
  // S is symmetric, so S^T d = S d.
  const Matrix d_h1 = s * d_agg_h;
  const Matrix d_pre1 = d_h1.cwiseProduct((a.pre1.array() > 0.0).cast<double>().matrix());
  g.w1 = a.agg_x.transpose() * d_pre1 + weight_decay * p.w1;
  g.b1 = d_pre1.colwise().sum();

  if (keep) *keep = std::move(a);
  return out;
}

Vector flatten(const ModelParams& p) {
  Eigen::Index size = 0;
  p.for_each_block([&](const auto& m) { size += m.size(); });
  Vector out(size);
  Eigen::Index at = 0;
  p.for_each_block([&](const auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) out(at++) = m(i, j);
    }
  });
  return out;
}

void unflatten(const Vector& v, ModelParams& p) {
  Eigen::Index at = 0;
  p.for_each_block([&](auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = v(at++);
    }
  });
}

double accuracy_from_logits(const Matrix& logits, const LabeledNodes& truth) {
  if (truth.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    Eigen::Index best = 0;
    logits.row(truth.nodes[i]).maxCoeff(&best);
    correct += (best == truth.labels[i]) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

TrainResult train_impl(const ModelParams& initial, const AdjacencyView& adjacency,
                       const Matrix& features, const LabeledNodes& main,
                       const LabeledNodes& leftover, const LabeledNodes& validation,
                       const TrainConfig& cfg) {
  check_shapes(initial, adjacency, features);
  if (main.empty()) throw InputError("training needs a non-empty clean set");
  if (!(cfg.learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
  if (cfg.lambda_dual < 0.0) throw InputError("lambda_dual must be >= 0");
  if (cfg.epochs < 1) throw InputError("epochs must be >= 1");
  const Eigen::Index n = features.rows();
  check_targets(main, n, initial.num_classes(), "training set");
  check_targets(leftover, n, initial.num_classes(), "pseudo-head set");
  check_targets(validation, n, initial.num_classes(), "validation set");

  const SparseMatrix& s = adjacency.normalized();
  const Matrix agg_x = s * features;

  ModelParams current = initial;
  Vector theta = flatten(current);
  Vector m1 = Vector::Zero(theta.size());
  Vector m2 = Vector::Zero(theta.size());

  TrainResult result;
  result.params = current;
  result.best_epoch = -1;
  result.best_validation_accuracy = -1.0;
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));

  double beta1_pow = 1.0;
  double beta2_pow = 1.0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    Activations act;
    const LossGradient lg = loss_gradient_impl(current, s, agg_x, main, leftover,
                                               cfg.lambda_dual, cfg.weight_decay, &act);
    if (!std::isfinite(lg.loss.total)) {
      throw RuntimeFailure("training diverged at epoch " + std::to_string(epoch));
    }
    result.loss_history.push_back(lg.loss.total);

    if (!validation.empty()) {
      const double acc = accuracy_from_logits(act.logits, validation);
      if (acc >= result.best_validation_accuracy) {
        result.best_validation_accuracy = acc;
        result.best_epoch = epoch;
        result.params = current;
      }
    }

    const Vector grad = flatten(lg.grad);
    beta1_pow *= kAdamBeta1;
    beta2_pow *= kAdamBeta2;
    m1 = kAdamBeta1 * m1 + (1.0 - kAdamBeta1) * grad;
    m2 = kAdamBeta2 * m2 + (1.0 - kAdamBeta2) * grad.cwiseProduct(grad);
    const double lr_t = cfg.learning_rate * std::sqrt(1.0 - beta2_pow) / (1.0 - beta1_pow);
    theta.array() -= lr_t * m1.array() / (m2.array().sqrt() + kAdamEps);
    unflatten(theta, current);
  }

  if (!current.all_finite()) throw RuntimeFailure("training produced non-finite parameters");
  if (validation.empty()) {
    result.params = current;
    result.best_epoch = cfg.epochs;
    result.best_validation_accuracy = 0.0;
  } else {
    const ForwardOutput last = forward(current, adjacency, features);
    const double acc = accuracy_from_logits(last.logits, validation);
    if (acc >= result.best_validation_accuracy) {
      result.best_validation_accuracy = acc;
      result.best_epoch = cfg.epochs;
      result.params = current;
    }
  }
  return result;
}

}  // namespace

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each_block([&](const auto& m) { ok = ok && m.allFinite(); });
  return ok;
}

ModelParams init_params(Eigen::Index input_dim, Eigen::Index hidden, Eigen::Index num_classes,
                        std::uint64_t seed) {
  if (input_dim < 1 || hidden < 1 || num_classes < 1) {
    throw InputError("model dimensions must all be >= 1");
  }
  std::mt19937_64 rng(seed);
  auto glorot = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
    }
    return m;
  };
  ModelParams p;
  p.seed = seed;
  p.w1 = glorot(input_dim, hidden);
  p.b1 = Eigen::RowVectorXd::Zero(hidden);
  p.w2 = glorot(hidden, hidden);
  p.b2 = Eigen::RowVectorXd::Zero(hidden);
  p.main_w = glorot(hidden, num_classes);
  p.main_b = Eigen::RowVectorXd::Zero(num_classes);
  p.pseudo_w = glorot(hidden, num_classes);
  p.pseudo_b = Eigen::RowVectorXd::Zero(num_classes);
  return p;
}

ForwardOutput forward(const ModelParams& params, const AdjacencyView& adjacency,
                      const Matrix& features) {
  check_shapes(params, adjacency, features);
  const SparseMatrix& s = adjacency.normalized();
  Activations a = run_forward(params, s, s * features);
  ForwardOutput out;
  out.soft = soft_labels(a.logits);
  out.hidden = std::move(a.h2);
  out.logits = std::move(a.logits);
  out.pseudo_logits = std::move(a.pseudo_logits);
  return out;
}

SoftLabelMatrix soft_labels(const Matrix& logits) {
  if (!logits.allFinite()) throw InputError("logits contain non-finite values");
  SoftLabelMatrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const Eigen::RowVectorXd e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp().matrix();
    out.row(i) = e / e.sum();
  }
  return out;
}

std::vector<ClassId> argmax_rows(const Matrix& scores) {
  std::vector<ClassId> out(static_cast<std::size_t>(scores.rows()));
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < scores.cols(); ++j) {
      if (scores(i, j) > scores(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<ClassId>(best);
  }
  return out;
}

std::vector<ClassId> predict(const ModelParams& params, const AdjacencyView& adjacency,
                             const Matrix& features) {
  return argmax_rows(forward(params, adjacency, features).logits);
}

LossBreakdown dual_loss(const ModelParams& params, const AdjacencyView& adjacency,
                        const Matrix& features, const LabeledNodes& main,
                        const LabeledNodes& leftover, double lambda_dual, double weight_decay) {
  check_shapes(params, adjacency, features);
  const SparseMatrix& s = adjacency.normalized();
  const Activations a = run_forward(params, s, s * features);
  const bool use_pseudo = pseudo_active(leftover, lambda_dual);
  LossBreakdown out;
  out.main = cross_entropy(a.logits, main, nullptr, 1.0);
  if (use_pseudo) out.pseudo = cross_entropy(a.pseudo_logits, leftover, nullptr, 1.0);
  out.total = out.main + (use_pseudo ? lambda_dual * out.pseudo : 0.0) +
              weight_decay * decay_term(params, use_pseudo);
  return out;
}

LossGradient dual_loss_gradient(const ModelParams& params, const AdjacencyView& adjacency,
                                const Matrix& features, const LabeledNodes& main,
                                const LabeledNodes& leftover, double lambda_dual,
                                double weight_decay) {
  check_shapes(params, adjacency, features);
  const SparseMatrix& s = adjacency.normalized();
  return loss_gradient_impl(params, s, s * features, main, leftover, lambda_dual, weight_decay,
                            nullptr);
}

TrainResult train_dual(const ModelParams& initial, const AdjacencyView& adjacency,
                       const Matrix& features, const LabeledNodes& clean,
                       const LabeledNodes& consistent_pseudo, const LabeledNodes& leftover_pseudo,
                       const LabeledNodes& validation, const TrainConfig& cfg) {
  if (clean.empty()) throw InputError("train_dual needs a non-empty clean set");
  return train_impl(initial, adjacency, features, concat(clean, consistent_pseudo),
                    leftover_pseudo, validation, cfg);
}

TrainResult train_supervised(const ModelParams& initial, const AdjacencyView& adjacency,
                             const Matrix& features, const LabeledNodes& labeled,
                             const LabeledNodes& validation, const TrainConfig& cfg) {
  return train_impl(initial, adjacency, features, labeled, LabeledNodes{}, validation, cfg);
}

double accuracy(std::span<const ClassId> predictions, const LabeledNodes& truth) {
  if (truth.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    correct += (predictions[static_cast<std::size_t>(truth.nodes[i])] == truth.labels[i]) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

double gradient_check(const ModelParams& params, const AdjacencyView& adjacency,
                      const Matrix& features, const LabeledNodes& main,
                      const LabeledNodes& leftover, double lambda_dual, double weight_decay,
                      double step) {
  const LossGradient analytic =
      dual_loss_gradient(params, adjacency, features, main, leftover, lambda_dual, weight_decay);
  const Vector a = flatten(analytic.grad);
  Vector theta = flatten(params);
  ModelParams probe = params;
  double worst = 0.0;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double saved = theta(i);
    theta(i) = saved + step;
    unflatten(theta, probe);
    const double up =
        dual_loss(probe, adjacency, features, main, leftover, lambda_dual, weight_decay).total;
    theta(i) = saved - step;
    unflatten(theta, probe);
    const double down =
        dual_loss(probe, adjacency, features, main, leftover, lambda_dual, weight_decay).total;
    theta(i) = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double err = std::abs(a(i) - numeric) / std::max(std::abs(a(i)) + std::abs(numeric), 1e-6);
    worst = std::max(worst, err);
  }
  return worst;
}

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
  } else {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
}

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw InputError("checkpoint truncated");
  }
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint " + path.string());
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.input_dim()));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.hidden()));
  write_le<std::uint64_t>(out, static_cast<std::uint64_t>(params.num_classes()));
  write_le<std::uint64_t>(out, params.seed);
  params.for_each_block([&](const auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) write_le<double>(out, m(i, j));
    }
  });
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint " + path.string());
  char magic[sizeof(kCheckpointMagic)];
  if (!in.read(magic, sizeof(magic)) ||
      std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw InputError("not a checkpoint file: " + path.string());
  }
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw InputError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto d = static_cast<Eigen::Index>(read_le<std::uint64_t>(in));
  const auto h = static_cast<Eigen::Index>(read_le<std::uint64_t>(in));
  const auto c = static_cast<Eigen::Index>(read_le<std::uint64_t>(in));
  const auto seed = read_le<std::uint64_t>(in);
  ModelParams p = init_params(d, h, c, seed);
  p.for_each_block([&](auto& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = read_le<double>(in);
    }
  });
  return p;
}

}  // namespace hcgst
