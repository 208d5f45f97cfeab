// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "hcgst/graph.hpp"
#include "hcgst/homophily.hpp"
#include "hcgst/shift_metrics.hpp"

namespace hcgst {

/// Inputs of one selection-vector optimization. All per-candidate vectors
/// are co-indexed with `candidates`.
struct SelectionProblem {
  std::vector<NodeId> candidates;
  Matrix cand_repr;    ///< |C| x d representations of the candidates
  Matrix global_repr;  ///< m x d representations of all nodes
  std::vector<double> cand_homophily;
  TargetDistribution target;
  int k = 1;
  double lambda_s = 2.0;
  int n_bins = 10;
  CmdConfig cmd;
  double kl_eps = kDefaultKlEpsilon;

  /// Throws InputError on inconsistent sizes or out-of-range values.
  void validate() const;
};

/// Selection probabilities, one per candidate, kept inside [0, 1].
struct SelectionVector {
  std::vector<double> q;
};

struct SelectionOptions {
  int iterations = 200;
  double step = 0.05;
  /// When true, every iterate is recorded in the trace.
  bool trace = false;
};

struct SelectionLoss {
  double total = 0.0;
  double cmd = 0.0;
  double kl = 0.0;
  double penalty = 0.0;
};

struct SelectionTraceRow {
  int iteration = 0;
  SelectionLoss loss;
  double q_l1 = 0.0;
};

struct SelectionResult {
  SelectionVector best;
  SelectionLoss best_loss;
  SelectionLoss initial_loss;
  int best_iteration = 0;
  std::vector<SelectionTraceRow> trace;
};

/// Nodes whose max soft-label probability exceeds delta_c, excluding prior
/// pseudo nodes as well as labeled and validation nodes; ascending id order.
std::vector<NodeId> candidate_set(const SoftLabelMatrix& soft, std::span<const NodeId> prior_pseudo,
                                  std::span<const NodeId> labeled,
                                  std::span<const NodeId> validation, double delta_c);

/// Sum of q_j per homophily bin of candidate j (closed last bin).
HomophilyDistribution selection_bin_mass(std::span<const double> q,
                                         std::span<const double> cand_homophily, int n_bins);

/// L_q = CMD(Z^G, q * Z^C) + lambda_s KL(B^q || B^target) + max(0, |q|_1 - K).
SelectionLoss selection_loss(const SelectionProblem& problem, std::span<const double> q);

struct SelectionLossGradient {
  SelectionLoss loss;
  std::vector<double> grad;
};
SelectionLossGradient selection_loss_gradient(const SelectionProblem& problem,
                                              std::span<const double> q);

/// q0 = min(K/|C|, 1) in every entry.
SelectionVector initial_selection(const SelectionProblem& problem);

/// Projected gradient descent on L_q from the uniform start; returns the
/// iterate with the lowest loss seen (the start included). Throws
/// RuntimeFailure naming the term that became non-finite.
SelectionResult optimize_selection(const SelectionProblem& problem,
                                   const SelectionOptions& options = {});

/// The K candidates with the largest q; ties by higher confidence, then lower
/// node id. Returns every candidate when |C| < K.
std::vector<NodeId> top_k(std::span<const double> q, int k, std::span<const NodeId> candidates,
                          std::span<const double> confidence);

/// CSV "iteration,loss,cmd,kl,penalty,q_l1".
void write_selection_trace_csv(std::ostream& out, std::span<const SelectionTraceRow> rows);

}  // namespace hcgst
