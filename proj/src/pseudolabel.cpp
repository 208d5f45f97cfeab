// SPDX-License-Identifier: Apache-2.0
#include "hcgst/pseudolabel.hpp"

#include "hcgst/error.hpp"

namespace hcgst {

MixedOutput mix_outputs(const Matrix& one_hop, const Matrix& multi_hop,
                        std::span<const double> est_homophily, double delta_h) {
  if (one_hop.rows() != multi_hop.rows() || one_hop.cols() != multi_hop.cols()) {
    throw InputError("one-hop and multi-hop outputs differ in shape");
  }
  if (static_cast<Eigen::Index>(est_homophily.size()) != one_hop.rows()) {
    throw InputError("homophily estimates are not co-indexed with output rows");
  }
  MixedOutput out;
  out.rows = one_hop;
  out.source.assign(est_homophily.size(), OutputSource::kOneHop);
  for (std::size_t i = 0; i < est_homophily.size(); ++i) {
    if (est_homophily[i] < delta_h) {
      const auto row = static_cast<Eigen::Index>(i);
      out.rows.row(row) = multi_hop.row(row);
      out.source[i] = OutputSource::kMultiHop;
    }
  }
  return out;
}

std::vector<PseudoLabel> assign_pseudo_labels(const MixedOutput& mixed,
                                              std::span<const NodeId> pseudo_nodes) {
  std::vector<PseudoLabel> out;
  out.reserve(pseudo_nodes.size());
  for (std::size_t i = 0; i < pseudo_nodes.size(); ++i) {
    const NodeId v = pseudo_nodes[i];
    if (v < 0 || v >= mixed.rows.rows()) {
      throw RecordError("pseudo node out of range", static_cast<long long>(i));
    }
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < mixed.rows.cols(); ++j) {
      if (mixed.rows(v, j) > mixed.rows(v, best)) best = j;
    }
    out.push_back({v, static_cast<ClassId>(best), mixed.source[static_cast<std::size_t>(v)]});
  }
  return out;
}

}  // namespace hcgst
