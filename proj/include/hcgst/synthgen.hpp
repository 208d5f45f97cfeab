// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcgst/graph.hpp"

namespace hcgst {

struct SynthConfig {
  int n = 500;
  int classes = 3;
  int feature_dim = 16;
  double mean_degree = 8.0;
  /// Relative mass per homophily bin for the per-node target ratios.
  std::vector<double> target_histogram = {4, 3, 2, 1, 1, 1, 1, 1, 2, 4};
  double separation = 1.0;
  /// Cross-class edges join class c only to class c ^ 1 (when it exists)
  /// instead of any other class.
  bool paired_classes = false;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class BiasMode { kHomophilyBiased, kRepresentative, kHeterophilyBiased };

std::string to_string(BiasMode mode);
BiasMode parse_bias_mode(const std::string& text);

/// Labels uniform over classes; each node draws a target homophily from the
/// histogram and initiates edges to same-class partners with that
/// probability, cross-class otherwise. Partners are drawn in proportion to
/// their own target (same-class) or its complement (cross-class). Features
/// are separation * class mean + N(0, 1) noise.
Graph generate_graph(const SynthConfig& cfg);

struct TrainingSample {
  std::vector<NodeId> nodes;
  /// Draws that had to come from a neighbouring bin because the requested
  /// bin ran out of nodes.
  int fallback_events = 0;
};

/// Draws floor(label_rate * n) distinct nodes whose true-homophily bins follow
/// the mode: all budget in the top four bins (homophily-biased), in the
/// bottom four bins (heterophily-biased), or proportional to the global
/// histogram (representative). Within a bin, nodes of classes not yet drawn
/// are preferred.
TrainingSample sample_training_set(const Graph& graph, double label_rate, BiasMode mode,
                                   int n_bins, std::uint64_t seed);

/// Measured statistics plus the echoed config, as written to meta.json.
nlohmann::json synth_meta(const SynthConfig& cfg, const Graph& graph);

/// Graph directory plus meta.json.
void write_synthetic(const SynthConfig& cfg, const Graph& graph, const std::filesystem::path& dir);

nlohmann::json to_json(const SynthConfig& cfg);
SynthConfig synth_config_from_json(const nlohmann::json& j);

}  // namespace hcgst
