// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hcgst/graph.hpp"

namespace hcgst {

enum class OutputSource : std::uint8_t { kOneHop, kMultiHop };

/// Per-node labeling scores: rows come from the k-hop output for nodes whose
/// estimated homophily is below delta_h, from the 1-hop output otherwise.
struct MixedOutput {
  Matrix rows;
  std::vector<OutputSource> source;
};

MixedOutput mix_outputs(const Matrix& one_hop, const Matrix& multi_hop,
                        std::span<const double> est_homophily, double delta_h);

struct PseudoLabel {
  NodeId node = 0;
  ClassId label = 0;
  OutputSource source = OutputSource::kOneHop;
};

/// Argmax of the mixed row per pseudo node; ties to the lowest class index.
std::vector<PseudoLabel> assign_pseudo_labels(const MixedOutput& mixed,
                                              std::span<const NodeId> pseudo_nodes);

}  // namespace hcgst
