// SPDX-License-Identifier: Apache-2.0
#include "hcgst/homophily.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "hcgst/error.hpp"
#include "hcgst/text_io.hpp"

namespace hcgst {

double HomophilyDistribution::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), 0.0);
}

int bin_index(double ratio, int n_bins) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) {
    throw InputError("homophily ratio outside [0, 1]: " + format_double(ratio));
  }
  const int i = static_cast<int>(std::floor(ratio * n_bins));
  return i >= n_bins ? n_bins - 1 : i;
}

double estimate_node_homophily(const SoftLabelMatrix& soft, const Graph& graph, NodeId node) {
  if (soft.rows() != static_cast<Eigen::Index>(graph.num_nodes())) {
    throw InputError("soft label rows do not match node count");
  }
  const auto nb = graph.neighbors(node);
  if (nb.empty()) return 0.0;
  const double self_norm = soft.row(node).norm();
  if (!(self_norm > 0.0)) {
    throw RecordError("soft label row has zero norm", node);
  }
  double sum = 0.0;
  for (NodeId u : nb) {
    const double norm = soft.row(u).norm();
    if (!(norm > 0.0)) throw RecordError("soft label row has zero norm", u);
    sum += soft.row(u).dot(soft.row(node)) / (norm * self_norm);
  }
  const double h = sum / static_cast<double>(nb.size());
  return std::clamp(h, 0.0, 1.0);
}

std::vector<double> estimate_homophily_all(const SoftLabelMatrix& soft, const Graph& graph) {
  std::vector<double> out(graph.num_nodes());
  for (std::size_t v = 0; v < out.size(); ++v) {
    out[v] = estimate_node_homophily(soft, graph, static_cast<NodeId>(v));
  }
  return out;
}

SoftLabelMatrix with_one_hot_rows(const SoftLabelMatrix& soft,
                                  std::span<const std::pair<NodeId, ClassId>> assignments) {
  SoftLabelMatrix out = soft;
  for (const auto& [node, label] : assignments) {
    if (node < 0 || node >= out.rows()) throw RecordError("override node out of range", node);
    if (label < 0 || label >= out.cols()) throw RecordError("override label out of range", node);
    out.row(node).setZero();
    out(node, label) = 1.0;
  }
  return out;
}

HomophilyDistribution bin_distribution(std::span<const double> ratios, int n_bins) {
  if (n_bins < 1) throw InputError("bin count must be >= 1");
  HomophilyDistribution dist(n_bins);
  for (double r : ratios) dist.counts[static_cast<std::size_t>(bin_index(r, n_bins))] += 1.0;
  return dist;
}

HomophilyDistribution estimate_distribution(
    const SoftLabelMatrix& soft, const Graph& graph, std::span<const NodeId> node_set,
    std::optional<std::span<const std::pair<NodeId, ClassId>>> label_override, int n_bins) {
  if (n_bins < 1) throw InputError("bin count must be >= 1");
  HomophilyDistribution dist(n_bins);
  if (node_set.empty()) return dist;
  const SoftLabelMatrix effective = label_override ? with_one_hot_rows(soft, *label_override) : soft;
  for (NodeId v : node_set) {
    const double h = estimate_node_homophily(effective, graph, v);
    dist.counts[static_cast<std::size_t>(bin_index(h, n_bins))] += 1.0;
  }
  return dist;
}

TargetDistribution target_distribution(const HomophilyDistribution& global,
                                       const HomophilyDistribution& local, int k) {
  if (k < 1) throw InputError("K must be >= 1");
  if (global.n_bins() != local.n_bins()) throw InputError("bin count mismatch");
  const double global_total = global.total();
  if (!(global_total > 0.0)) throw InputError("global distribution has zero total");
  const double budget = static_cast<double>(k) + local.total();

  TargetDistribution target;
  target.counts.resize(global.counts.size());
  for (std::size_t i = 0; i < global.counts.size(); ++i) {
    // Multiply before dividing so integer inputs stay exact where possible.
    const double wanted = global.counts[i] * budget / global_total;
    target.counts[i] = std::max(std::ceil(wanted - local.counts[i]), 0.0);
  }
  return target;
}

void write_distribution_csv(std::ostream& out, std::span<const double> counts) {
  out << "bin_index,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i) out << i << ',' << format_double(counts[i]) << '\n';
}

}  // namespace hcgst
