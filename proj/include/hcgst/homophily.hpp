// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "hcgst/graph.hpp"

namespace hcgst {

/// Row-per-node class-probability matrix.
using SoftLabelMatrix = Matrix;

/// N-bin histogram over evenly divided homophily intervals. Counts are real so
/// the same type holds selection-weighted masses.
struct HomophilyDistribution {
  std::vector<double> counts;

  explicit HomophilyDistribution(int n_bins = 0) : counts(static_cast<std::size_t>(n_bins), 0.0) {}
  int n_bins() const noexcept { return static_cast<int>(counts.size()); }
  double total() const noexcept;
};

/// Target node count per bin for the next pseudo-node batch; never negative.
struct TargetDistribution {
  std::vector<double> counts;
  int n_bins() const noexcept { return static_cast<int>(counts.size()); }
};

/// Bin index in [0, N) of a ratio; bins are [(i)/N, (i+1)/N) with the last
/// bin closed so that 1.0 lands in bin N-1.
int bin_index(double ratio, int n_bins);

/// Mean cosine similarity between the node's soft label and each 1-hop
/// neighbor's. Isolated nodes get 0.
double estimate_node_homophily(const SoftLabelMatrix& soft, const Graph& graph, NodeId node);
std::vector<double> estimate_homophily_all(const SoftLabelMatrix& soft, const Graph& graph);

/// Copy of `soft` with the given nodes' rows replaced by one-hot labels.
SoftLabelMatrix with_one_hot_rows(const SoftLabelMatrix& soft,
                                  std::span<const std::pair<NodeId, ClassId>> assignments);

HomophilyDistribution bin_distribution(std::span<const double> ratios, int n_bins);

/// Bins estimated ratios of `node_set`. When `label_override` is given, those
/// nodes' soft labels are first replaced by their one-hot labels, which also
/// affects them as neighbors of other nodes.
HomophilyDistribution estimate_distribution(
    const SoftLabelMatrix& soft, const Graph& graph, std::span<const NodeId> node_set,
    std::optional<std::span<const std::pair<NodeId, ClassId>>> label_override, int n_bins);

/// Per-bin target counts for adding K nodes to a local set with the given bin
/// counts, proportional to the global bin frequencies and clamped at zero.
TargetDistribution target_distribution(const HomophilyDistribution& global,
                                       const HomophilyDistribution& local, int k);

/// CSV rows "bin_index,count" with a header line.
void write_distribution_csv(std::ostream& out, std::span<const double> counts);

}  // namespace hcgst
