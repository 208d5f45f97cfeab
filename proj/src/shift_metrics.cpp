// SPDX-License-Identifier: Apache-2.0
#include "hcgst/shift_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hcgst/error.hpp"

namespace hcgst {
namespace {

void check_samples(const Matrix& x, const Matrix& y) {
  if (x.rows() < 1 || y.rows() < 1) throw InputError("CMD needs non-empty sample sets");
  if (x.cols() != y.cols()) {
    throw InputError("CMD dimension mismatch: " + std::to_string(x.cols()) + " vs " +
                     std::to_string(y.cols()));
  }
  if (!x.allFinite() || !y.allFinite()) throw InputError("CMD input contains non-finite values");
}

double support_width(const Matrix& x, const Matrix& y, const CmdConfig& cfg) {
  if (cfg.max_order < 1) throw InputError("CMD max_order must be >= 1");
  double lo = 0.0;
  double hi = 0.0;
  if (cfg.support) {
    lo = cfg.support->lo;
    hi = cfg.support->hi;
    if (!(hi > lo)) throw InputError("CMD support requires hi > lo");
  } else {
    lo = std::min(x.minCoeff(), y.minCoeff());
    hi = std::max(x.maxCoeff(), y.maxCoeff());
  }
  const double width = std::abs(hi - lo);
  // Degenerate support means every sample is identical, so all moment
  // differences vanish; any positive scale gives the same result.
  return width > 0.0 ? width : 1.0;
}

/// Weighted mean and central moments 2..K of the rows of x (weights sum to 1).
struct Moments {
  Eigen::RowVectorXd mean;
  std::vector<Eigen::RowVectorXd> central;  // central[k] for k = 0..K, [0], [1] unused
};

Moments moments(const Matrix& x, const Vector& p, int max_order) {
  Moments m;
  m.mean = p.transpose() * x;
  m.central.assign(static_cast<std::size_t>(max_order) + 1,
                   Eigen::RowVectorXd::Zero(x.cols()));
  if (max_order < 2) return m;
  const Matrix centered = x.rowwise() - m.mean;
  Matrix power = centered;
  for (int k = 2; k <= max_order; ++k) {
    power = power.cwiseProduct(centered);
    m.central[static_cast<std::size_t>(k)] = p.transpose() * power;
  }
  return m;
}

Vector normalized_weights(std::span<const double> weights, Eigen::Index rows, double* total_out) {
  if (static_cast<Eigen::Index>(weights.size()) != rows) {
    throw InputError("weight count does not match sample rows");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw InputError("weights must be finite and non-negative");
    total += w;
  }
  if (!(total > 0.0)) throw InputError("weights have zero total");
  Vector p(rows);
  for (Eigen::Index i = 0; i < rows; ++i) p(i) = weights[static_cast<std::size_t>(i)] / total;
  if (total_out) *total_out = total;
  return p;
}

double cmd_from_moments(const Moments& mx, const Moments& my, double width, int max_order) {
  double value = (mx.mean - my.mean).norm() / width;
  double scale = width;
  for (int k = 2; k <= max_order; ++k) {
    scale *= width;
    const auto ku = static_cast<std::size_t>(k);
    value += (mx.central[ku] - my.central[ku]).norm() / scale;
  }
  return value;
}

}  // namespace

double cmd(const Matrix& x, const Matrix& y, const CmdConfig& cfg) {
  check_samples(x, y);
  const double width = support_width(x, y, cfg);
  const Vector px = Vector::Constant(x.rows(), 1.0 / static_cast<double>(x.rows()));
  const Vector py = Vector::Constant(y.rows(), 1.0 / static_cast<double>(y.rows()));
  return cmd_from_moments(moments(x, px, cfg.max_order), moments(y, py, cfg.max_order), width,
                          cfg.max_order);
}

double cmd_weighted(const Matrix& x, std::span<const double> weights, const Matrix& y,
                    const CmdConfig& cfg) {
  check_samples(x, y);
  const double width = support_width(x, y, cfg);
  const Vector px = normalized_weights(weights, x.rows(), nullptr);
  const Vector py = Vector::Constant(y.rows(), 1.0 / static_cast<double>(y.rows()));
  return cmd_from_moments(moments(x, px, cfg.max_order), moments(y, py, cfg.max_order), width,
                          cfg.max_order);
}

CmdGradient cmd_weighted_with_gradient(const Matrix& x, std::span<const double> weights,
                                       const Matrix& y, const CmdConfig& cfg) {
  check_samples(x, y);
  const double width = support_width(x, y, cfg);
  double total = 0.0;
  const Vector p = normalized_weights(weights, x.rows(), &total);
  const Vector py = Vector::Constant(y.rows(), 1.0 / static_cast<double>(y.rows()));
  const int order = cfg.max_order;
  const Moments mx = moments(x, p, order);
  const Moments my = moments(y, py, order);

  CmdGradient out;
  out.value = cmd_from_moments(mx, my, width, order);

  // Gradient with respect to the normalized weights p, treating p as free:
  //   d mean / d p_j = x_j
  //   d c_k / d p_j  = (x_j - mean)^k - k * c_{k-1} o x_j
  // where c_1 is the (zero) first central moment under sum(p) = 1.
  const Matrix centered = x.rowwise() - mx.mean;
  Vector grad_p = Vector::Zero(x.rows());

  auto unit = [](const Eigen::RowVectorXd& diff) -> Eigen::RowVectorXd {
    const double norm = diff.norm();
    return norm > 0.0 ? Eigen::RowVectorXd(diff / norm) : Eigen::RowVectorXd::Zero(diff.size());
  };

  // Accumulate the total derivative with respect to the mean separately since
  // every central moment depends on it.
  Eigen::RowVectorXd d_mean = unit(mx.mean - my.mean) / width;
  double scale = width;
  Matrix power = centered;  // (x - mean)^(k-1)
  for (int k = 2; k <= order; ++k) {
    scale *= width;
    const auto ku = static_cast<std::size_t>(k);
    const Eigen::RowVectorXd u = unit(mx.central[ku] - my.central[ku]) / scale;
    const Eigen::RowVectorXd prev = p.transpose() * power;
    const Matrix power_k = power.cwiseProduct(centered);
    grad_p += power_k * u.transpose();
    d_mean -= static_cast<double>(k) * prev.cwiseProduct(u);
    power = power_k;
  }
  grad_p += x * d_mean.transpose();

  // Chain through p = w / sum(w).
  const double mean_grad = p.dot(grad_p);
  out.grad = (grad_p.array() - mean_grad).matrix() / total;
  return out;
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double eps) {
  return kl_divergence_with_gradient(p, q, eps).value;
}

double kl_divergence(const HomophilyDistribution& p, const HomophilyDistribution& q, double eps) {
  return kl_divergence(std::span<const double>(p.counts), std::span<const double>(q.counts), eps);
}

KlGradient kl_divergence_with_gradient(std::span<const double> p, std::span<const double> q,
                                       double eps) {
  if (p.size() != q.size()) {
    throw InputError("KL bin-count mismatch: " + std::to_string(p.size()) + " vs " +
                     std::to_string(q.size()));
  }
  if (!(eps > 0.0)) throw InputError("KL smoothing eps must be > 0");
  const std::size_t n = p.size();
  double sp = 0.0;
  double sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(p[i]) || !std::isfinite(q[i]) || p[i] < 0.0 || q[i] < 0.0) {
      throw InputError("KL inputs must be finite and non-negative");
    }
    sp += p[i] + eps;
    sq += q[i] + eps;
  }
  KlGradient out;
  out.grad.assign(n, 0.0);
  std::vector<double> g(n);
  double mean_g = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pi = (p[i] + eps) / sp;
    const double ri = (q[i] + eps) / sq;
    const double log_ratio = std::log(pi / ri);
    out.value += pi * log_ratio;
    g[i] = log_ratio + 1.0;
    mean_g += pi * g[i];
  }
  for (std::size_t i = 0; i < n; ++i) out.grad[i] = (g[i] - mean_g) / sp;
  out.value = std::max(out.value, 0.0);
  return out;
}

}  // namespace hcgst
