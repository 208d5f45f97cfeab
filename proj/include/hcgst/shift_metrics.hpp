// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>

#include "hcgst/graph.hpp"
#include "hcgst/homophily.hpp"

namespace hcgst {

struct SupportBounds {
  double lo = 0.0;
  double hi = 1.0;
};

struct CmdConfig {
  int max_order = 5;
  /// When unset, [a, b] is the overall min/max over both sample sets.
  std::optional<SupportBounds> support;
};

constexpr double kDefaultKlEpsilon = 1e-8;

/// Central Moment Discrepancy between two sample sets (rows are samples):
///   |b-a|^-1 ||E(X)-E(Y)|| + sum_{k=2..K} |b-a|^-k ||c_k(X)-c_k(Y)||
/// with c_k the elementwise k-th central moment.
double cmd(const Matrix& x, const Matrix& y, const CmdConfig& cfg = {});

/// CMD where X's moments are taken under `weights` normalized to sum to one.
double cmd_weighted(const Matrix& x, std::span<const double> weights, const Matrix& y,
                    const CmdConfig& cfg = {});

/// Value plus d/d(weights) of cmd_weighted.
struct CmdGradient {
  double value = 0.0;
  Vector grad;
};
CmdGradient cmd_weighted_with_gradient(const Matrix& x, std::span<const double> weights,
                                       const Matrix& y, const CmdConfig& cfg = {});

/// Forward KL(P || Q) after adding eps to every count and normalizing.
double kl_divergence(std::span<const double> p, std::span<const double> q,
                     double eps = kDefaultKlEpsilon);
double kl_divergence(const HomophilyDistribution& p, const HomophilyDistribution& q,
                     double eps = kDefaultKlEpsilon);

/// Value plus d/dp (raw counts) of kl_divergence.
struct KlGradient {
  double value = 0.0;
  std::vector<double> grad;
};
KlGradient kl_divergence_with_gradient(std::span<const double> p, std::span<const double> q,
                                       double eps = kDefaultKlEpsilon);

}  // namespace hcgst
