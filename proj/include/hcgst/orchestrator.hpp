// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hcgst/graph.hpp"
#include "hcgst/model.hpp"
#include "hcgst/pseudolabel.hpp"
#include "hcgst/selection.hpp"

namespace hcgst {

enum class Variant {
  kHcgst,
  kStConfidence,
  kNoSelection,
  kNoMultihop,
  kNoDualhead,
  kBackboneOnly,
  kCmdOnly,
};

std::string to_string(Variant v);
/// Throws InputError on an unknown name.
Variant parse_variant(const std::string& name);
const std::vector<Variant>& all_variants();

struct RunConfig {
  int stages = 10;
  /// Pseudo nodes per stage; unset means |labeled|.
  std::optional<int> k;
  double delta_c = 0.65;
  double delta_h = 0.4;
  double lambda_s = 2.0;
  double lambda_d = 0.09;
  int n_bins = 10;
  int hop = 2;
  Variant variant = Variant::kHcgst;
  std::uint64_t seed = 0;
  int hidden = 32;
  /// Stop after this many consecutive stages without a validation gain.
  int patience = 2;
  TrainConfig train;
  SelectionOptions selection;

  void validate() const;
};

/// One executed (or skipped) stage; stage 0 describes the backbone.
struct StageReport {
  int stage = 0;
  bool skipped = false;
  std::size_t candidate_count = 0;
  std::vector<PseudoLabel> selected;
  std::size_t multi_hop_routed = 0;
  std::size_t pseudo_total = 0;
  /// Mean estimated homophily (at selection time) over the cumulative pseudo set.
  double pseudo_mean_est_homophily = 0.0;
  /// Mean ground-truth homophily of the cumulative pseudo set (NaN without labels).
  double pseudo_mean_true_homophily = 0.0;
  double global_mean_est_homophily = 0.0;
  /// KL(B^L || B^G) over labeled + pseudo nodes, from the stage's retrained model.
  double kl_local_global = 0.0;
  /// Same with ground-truth ratios.
  double kl_local_global_true = 0.0;
  double cmd_local_global = 0.0;
  double pseudo_label_accuracy = 0.0;
  double validation_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::optional<SelectionLoss> selection_initial;
  std::optional<SelectionLoss> selection_final;
};

struct BinAccuracy {
  std::vector<double> accuracy;  ///< 0 for empty bins
  std::vector<std::size_t> count;

  bool empty(std::size_t i) const { return count[i] == 0; }
};

struct BiasMetrics {
  double tpv = 0.0;
  double npv = 0.0;
  double ppv = 0.0;
};

struct BinReport {
  BinAccuracy backbone;
  BinAccuracy self_trained;
  std::vector<double> delta;  ///< self_trained - backbone, 0 for empty bins
  BiasMetrics bias;
  double accuracy = 0.0;
  double backbone_accuracy = 0.0;
};

struct RunReport {
  RunConfig config;
  std::vector<StageReport> stages;  ///< stages[0] is the backbone
  int best_stage = 0;
  int last_stage = 0;
  std::vector<NodeId> pseudo_nodes;
  std::vector<ClassId> predictions;
  BinReport bins;
  std::vector<std::string> warnings;

  const StageReport& final_stage() const { return stages.back(); }
};

struct RunOutcome {
  RunReport report;
  ModelParams params;
};

/// Accuracy over the test nodes falling in each true-homophily bin.
BinAccuracy per_bin_accuracy(std::span<const ClassId> predictions,
                             std::span<const ClassId> truth,
                             std::span<const double> true_homophily, int n_bins,
                             std::span<const NodeId> test_set);

/// TPV averages all co-indexed deltas, NPV the negative ones, PPV the positive
/// ones (0 when there are none). Callers drop empty bins first.
BiasMetrics bias_metrics(std::span<const double> acc_self_trained,
                         std::span<const double> acc_backbone);

BinReport make_bin_report(std::span<const ClassId> backbone_pred,
                          std::span<const ClassId> final_pred, const Graph& graph,
                          const NodePartition& partition, int n_bins);

/// Random validation draw of `count` nodes outside `labeled`.
NodePartition make_partition(const Graph& graph, std::vector<NodeId> labeled,
                             std::size_t validation_count, std::uint64_t seed);

using WarningSink = std::function<void(const std::string&)>;

/// Self-training stage loop for the configured variant. `partition` is copied;
/// the returned report carries the final pseudo set.
RunOutcome run_self_training(const Graph& graph, const NodePartition& partition,
                             const RunConfig& cfg, const WarningSink& warn = {});

/// Same as run_self_training; kept as the entry point used for comparisons.
RunOutcome run_variant(const Graph& graph, const NodePartition& partition, const RunConfig& cfg,
                       const WarningSink& warn = {});

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunReport& report);

}  // namespace hcgst
