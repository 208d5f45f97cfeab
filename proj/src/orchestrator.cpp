// SPDX-License-Identifier: Apache-2.0
#include "hcgst/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "hcgst/error.hpp"
#include "hcgst/homophily.hpp"
#include "hcgst/shift_metrics.hpp"

namespace hcgst {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kHcgst: return "hcgst";
    case Variant::kStConfidence: return "st_confidence";
    case Variant::kNoSelection: return "no_selection";
    case Variant::kNoMultihop: return "no_multihop";
    case Variant::kNoDualhead: return "no_dualhead";
    case Variant::kBackboneOnly: return "backbone_only";
    case Variant::kCmdOnly: return "cmd_only";
  }
  return "unknown";
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> kAll = {
      Variant::kHcgst,      Variant::kStConfidence, Variant::kNoSelection, Variant::kNoMultihop,
      Variant::kNoDualhead, Variant::kBackboneOnly, Variant::kCmdOnly};
  return kAll;
}

Variant parse_variant(const std::string& name) {
  for (Variant v : all_variants()) {
    if (to_string(v) == name) return v;
  }
  throw InputError("unknown variant '" + name + "'");
}

void RunConfig::validate() const {
  if (stages < 1) throw InputError("stages must be >= 1");
  if (k && *k < 1) throw InputError("K must be >= 1");
  if (!(delta_c > 0.0 && delta_c < 1.0)) throw InputError("delta_c must lie in (0, 1)");
  if (!(delta_h >= 0.0)) throw InputError("delta_h must be >= 0");
  if (!(lambda_s >= 0.0)) throw InputError("lambda_s must be >= 0");
  if (!(lambda_d >= 0.0)) throw InputError("lambda_d must be >= 0");
  if (n_bins < 1) throw InputError("n_bins must be >= 1");
  if (hop < 1) throw InputError("hop must be >= 1");
  if (hidden < 1) throw InputError("hidden must be >= 1");
  if (patience < 1) throw InputError("patience must be >= 1");
  if (train.epochs < 1) throw InputError("epochs must be >= 1");
  if (!(train.learning_rate > 0.0)) throw InputError("learning_rate must be > 0");
  if (!(train.weight_decay >= 0.0)) throw InputError("weight_decay must be >= 0");
}

BinAccuracy per_bin_accuracy(std::span<const ClassId> predictions,
                             std::span<const ClassId> truth,
                             std::span<const double> true_homophily, int n_bins,
                             std::span<const NodeId> test_set) {
  BinAccuracy out;
  out.accuracy.assign(static_cast<std::size_t>(n_bins), 0.0);
  out.count.assign(static_cast<std::size_t>(n_bins), 0);
  std::vector<std::size_t> correct(static_cast<std::size_t>(n_bins), 0);
  for (NodeId v : test_set) {
    const auto vi = static_cast<std::size_t>(v);
    const auto b = static_cast<std::size_t>(bin_index(true_homophily[vi], n_bins));
    out.count[b] += 1;
    correct[b] += (predictions[vi] == truth[vi]) ? 1 : 0;
  }
  for (std::size_t b = 0; b < out.count.size(); ++b) {
    if (out.count[b] > 0) {
      out.accuracy[b] = static_cast<double>(correct[b]) / static_cast<double>(out.count[b]);
    }
  }
  return out;
}

BiasMetrics bias_metrics(std::span<const double> acc_self_trained,
                         std::span<const double> acc_backbone) {
  if (acc_self_trained.size() != acc_backbone.size()) {
    throw InputError("bias metrics need co-indexed bin vectors");
  }
  BiasMetrics m;
  double neg = 0.0, pos = 0.0, all = 0.0;
  std::size_t n_neg = 0, n_pos = 0;
  for (std::size_t i = 0; i < acc_self_trained.size(); ++i) {
    const double d = acc_self_trained[i] - acc_backbone[i];
    all += d;
    if (d < 0.0) {
      neg += d;
      ++n_neg;
    } else if (d > 0.0) {
      pos += d;
      ++n_pos;
    }
  }
  if (!acc_self_trained.empty()) m.tpv = all / static_cast<double>(acc_self_trained.size());
  if (n_neg) m.npv = neg / static_cast<double>(n_neg);
  if (n_pos) m.ppv = pos / static_cast<double>(n_pos);
  return m;
}

BinReport make_bin_report(std::span<const ClassId> backbone_pred,
                          std::span<const ClassId> final_pred, const Graph& graph,
                          const NodePartition& partition, int n_bins) {
  const auto& truth = graph.labels();
  const std::vector<double> h = true_node_homophily_all(graph);
  BinReport r;
  r.backbone = per_bin_accuracy(backbone_pred, truth, h, n_bins, partition.test());
  r.self_trained = per_bin_accuracy(final_pred, truth, h, n_bins, partition.test());
  r.delta.assign(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<double> st, bb;
  for (std::size_t b = 0; b < r.delta.size(); ++b) {
    if (r.backbone.empty(b)) continue;
    r.delta[b] = r.self_trained.accuracy[b] - r.backbone.accuracy[b];
    st.push_back(r.self_trained.accuracy[b]);
    bb.push_back(r.backbone.accuracy[b]);
  }
  r.bias = bias_metrics(st, bb);

  LabeledNodes test;
  for (NodeId v : partition.test()) test.add(v, truth[static_cast<std::size_t>(v)]);
  r.accuracy = accuracy(final_pred, test);
  r.backbone_accuracy = accuracy(backbone_pred, test);
  return r;
}

NodePartition make_partition(const Graph& graph, std::vector<NodeId> labeled,
                             std::size_t validation_count, std::uint64_t seed) {
  std::vector<char> taken(graph.num_nodes(), 0);
  for (NodeId v : labeled) {
    if (v >= 0 && static_cast<std::size_t>(v) < taken.size()) taken[static_cast<std::size_t>(v)] = 1;
  }
  std::vector<NodeId> pool;
  for (std::size_t v = 0; v < taken.size(); ++v) {
    if (!taken[v]) pool.push_back(static_cast<NodeId>(v));
  }
  if (validation_count > pool.size()) throw InputError("validation set larger than the remaining nodes");
  std::mt19937_64 rng(seed);
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(validation_count);
  std::sort(pool.begin(), pool.end());
  return NodePartition(graph.num_nodes(), std::move(labeled), std::move(pool));
}

namespace {

/// Which mechanisms a variant keeps.
struct VariantTraits {
  bool optimize = true;    // distribution-consistent selection (else confidence top-K)
  bool kl_term = true;     // lambda_s > 0 in the selection loss
  bool multi_hop = true;   // homophily-gated routing for labels
  bool dual_head = true;   // leftover candidates on the pseudo head
};

VariantTraits traits_for(Variant v) {
  switch (v) {
    case Variant::kHcgst: return {true, true, true, true};
    case Variant::kStConfidence: return {false, false, false, false};
    case Variant::kNoSelection: return {false, false, true, true};
    case Variant::kNoMultihop: return {true, true, false, true};
    case Variant::kNoDualhead: return {true, true, true, false};
    case Variant::kCmdOnly: return {true, false, false, false};
    case Variant::kBackboneOnly: return {false, false, false, false};
  }
  return {};
}

LabeledNodes ground_truth_for(const Graph& graph, std::span<const NodeId> nodes) {
  const auto& y = graph.labels();
  LabeledNodes out;
  for (NodeId v : nodes) out.add(v, y[static_cast<std::size_t>(v)]);
  return out;
}

double mean_of(std::span<const double> values, std::span<const NodeId> nodes) {
  if (nodes.empty()) return 0.0;
  double s = 0.0;
  for (NodeId v : nodes) s += values[static_cast<std::size_t>(v)];
  return s / static_cast<double>(nodes.size());
}

Matrix gather_rows(const Matrix& m, std::span<const NodeId> nodes) {
  Matrix out(static_cast<Eigen::Index>(nodes.size()), m.cols());
  for (std::size_t i = 0; i < nodes.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(nodes[i]);
  return out;
}

/// Distribution-shift measurements of a local node set under a given model.
struct ShiftSnapshot {
  double kl_est = 0.0;
  double kl_true = 0.0;
  double cmd = 0.0;
  double global_mean_est = 0.0;
};

ShiftSnapshot measure_shift(const Graph& graph, const ForwardOutput& fwd,
                            std::span<const std::pair<NodeId, ClassId>> overrides,
                            std::span<const NodeId> local, std::span<const double> true_h,
                            int n_bins) {
  ShiftSnapshot s;
  const SoftLabelMatrix soft = with_one_hot_rows(fwd.soft, overrides);
  const std::vector<double> est = estimate_homophily_all(soft, graph);
  const HomophilyDistribution global = bin_distribution(est, n_bins);
  std::vector<double> local_est;
  local_est.reserve(local.size());
  for (NodeId v : local) local_est.push_back(est[static_cast<std::size_t>(v)]);
  s.kl_est = kl_divergence(bin_distribution(local_est, n_bins), global);
  s.global_mean_est = std::accumulate(est.begin(), est.end(), 0.0) / static_cast<double>(est.size());
  if (!true_h.empty()) {
    std::vector<double> local_true;
    for (NodeId v : local) local_true.push_back(true_h[static_cast<std::size_t>(v)]);
    s.kl_true = kl_divergence(bin_distribution(local_true, n_bins), bin_distribution(true_h, n_bins));
  } else {
    s.kl_true = std::numeric_limits<double>::quiet_NaN();
  }
  if (!local.empty()) s.cmd = cmd(fwd.logits, gather_rows(fwd.logits, local));
  return s;
}

}  // namespace

RunOutcome run_self_training(const Graph& graph, const NodePartition& initial_partition,
                             const RunConfig& cfg, const WarningSink& warn) {
  cfg.validate();
  if (initial_partition.labeled().empty()) throw InputError("labeled set must not be empty");
  if (initial_partition.num_nodes() != graph.num_nodes()) {
    throw InputError("partition does not match the graph");
  }
  if (graph.num_classes() < 1) throw InputError("graph has no class count");
  const auto& truth = graph.labels();
  const VariantTraits traits = traits_for(cfg.variant);
  const Matrix& x = graph.features();
  const std::vector<double> true_h = true_node_homophily_all(graph);

  NodePartition partition = initial_partition;
  RunOutcome outcome;
  RunReport& report = outcome.report;
  report.config = cfg;
  auto emit = [&](const std::string& msg) {
    report.warnings.push_back(msg);
    if (warn) warn(msg);
  };

  // Training always uses the 1-hop view; the k-hop view only feeds labeling.
  const AdjacencyView adj1 = k_hop_adjacency(graph, 1);
  const AdjacencyView adjk = k_hop_adjacency(graph, cfg.hop);
  const LabeledNodes labeled = ground_truth_for(graph, partition.labeled());
  const LabeledNodes validation = ground_truth_for(graph, partition.validation());
  const LabeledNodes test = ground_truth_for(graph, partition.test());
  const int k = cfg.k.value_or(static_cast<int>(labeled.size()));

  TrainConfig train_cfg = cfg.train;
  train_cfg.seed = cfg.seed;
  train_cfg.lambda_dual = traits.dual_head ? cfg.lambda_d : 0.0;
  const ModelParams init =
      init_params(x.cols(), cfg.hidden, graph.num_classes(), cfg.seed);

  const TrainResult backbone = train_supervised(init, adj1, x, labeled, validation, train_cfg);
  const std::vector<ClassId> backbone_pred = predict(backbone.params, adj1, x);

  std::vector<std::pair<NodeId, ClassId>> overrides;
  for (std::size_t i = 0; i < labeled.size(); ++i) overrides.emplace_back(labeled.nodes[i], labeled.labels[i]);

  ModelParams current = backbone.params;
  ForwardOutput fwd = forward(current, adj1, x);
  {
    StageReport s0;
    const ShiftSnapshot shift =
        measure_shift(graph, fwd, overrides, partition.labeled(), true_h, cfg.n_bins);
    s0.kl_local_global = shift.kl_est;
    s0.kl_local_global_true = shift.kl_true;
    s0.cmd_local_global = shift.cmd;
    s0.global_mean_est_homophily = shift.global_mean_est;
    s0.validation_accuracy = accuracy(backbone_pred, validation);
    s0.test_accuracy = accuracy(backbone_pred, test);
    report.stages.push_back(std::move(s0));
  }

  ModelParams best_params = current;
  std::vector<ClassId> best_pred = backbone_pred;
  double best_val = report.stages[0].validation_accuracy;
  int best_stage = 0;
  int stale = 0;
  LabeledNodes pseudo;                 // frozen pseudo labels, in selection order
  std::vector<double> pseudo_est_h;    // estimated ratio at selection time

  const int stage_count = cfg.variant == Variant::kBackboneOnly ? 0 : cfg.stages;
  for (int s = 1; s <= stage_count; ++s) {
    StageReport rep;
    rep.stage = s;

    const SoftLabelMatrix soft_eff = with_one_hot_rows(fwd.soft, overrides);
    const std::vector<double> est_h = estimate_homophily_all(soft_eff, graph);
    const std::vector<NodeId> candidates =
        candidate_set(fwd.soft, partition.pseudo(), partition.labeled(), partition.validation(),
                      cfg.delta_c);
    rep.candidate_count = candidates.size();

    if (candidates.empty()) {
      emit("stage " + std::to_string(s) + ": empty candidate set, stage skipped");
      const StageReport& prev = report.stages.back();
      rep.skipped = true;
      rep.pseudo_total = prev.pseudo_total;
      rep.pseudo_mean_est_homophily = prev.pseudo_mean_est_homophily;
      rep.pseudo_mean_true_homophily = prev.pseudo_mean_true_homophily;
      rep.global_mean_est_homophily = prev.global_mean_est_homophily;
      rep.kl_local_global = prev.kl_local_global;
      rep.kl_local_global_true = prev.kl_local_global_true;
      rep.cmd_local_global = prev.cmd_local_global;
      rep.pseudo_label_accuracy = prev.pseudo_label_accuracy;
      rep.validation_accuracy = prev.validation_accuracy;
      rep.test_accuracy = prev.test_accuracy;
      report.stages.push_back(std::move(rep));
      if (++stale >= cfg.patience) break;
      continue;
    }

    std::vector<double> confidence(candidates.size());
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      confidence[j] = fwd.soft.row(candidates[j]).maxCoeff();
    }

    std::vector<NodeId> chosen;
    if (traits.optimize) {
      std::vector<NodeId> local = partition.labeled();
      local.insert(local.end(), partition.pseudo().begin(), partition.pseudo().end());
      std::vector<double> local_h;
      for (NodeId v : local) local_h.push_back(est_h[static_cast<std::size_t>(v)]);
      const HomophilyDistribution global_dist = bin_distribution(est_h, cfg.n_bins);
      const HomophilyDistribution local_dist = bin_distribution(local_h, cfg.n_bins);

      SelectionProblem problem;
      problem.candidates = candidates;
      problem.cand_repr = gather_rows(fwd.logits, candidates);
      problem.global_repr = fwd.logits;
      for (NodeId v : candidates) problem.cand_homophily.push_back(est_h[static_cast<std::size_t>(v)]);
      problem.target = target_distribution(global_dist, local_dist, k);
      problem.k = k;
      problem.lambda_s = traits.kl_term ? cfg.lambda_s : 0.0;
      problem.n_bins = cfg.n_bins;
      const SelectionResult sel = optimize_selection(problem, cfg.selection);
      rep.selection_initial = sel.initial_loss;
      rep.selection_final = sel.best_loss;
      chosen = top_k(sel.best.q, k, candidates, confidence);
    } else {
      chosen = top_k(confidence, k, candidates, confidence);
    }

    // Labels for the chosen nodes and, with the dual head, for the leftovers.
    const double delta_h = traits.multi_hop ? cfg.delta_h : 0.0;
    const Matrix multi_hop_out =
        traits.multi_hop ? forward(current, adjk, x).logits : fwd.logits;
    const MixedOutput mixed = mix_outputs(fwd.logits, multi_hop_out, est_h, delta_h);
    rep.selected = assign_pseudo_labels(mixed, chosen);

    partition.add_pseudo(chosen, s);
    std::size_t correct = 0;
    for (const PseudoLabel& pl : rep.selected) {
      pseudo.add(pl.node, pl.label);
      pseudo_est_h.push_back(est_h[static_cast<std::size_t>(pl.node)]);
      overrides.emplace_back(pl.node, pl.label);
      rep.multi_hop_routed += pl.source == OutputSource::kMultiHop ? 1 : 0;
    }
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
      correct += pseudo.labels[i] == truth[static_cast<std::size_t>(pseudo.nodes[i])] ? 1 : 0;
    }

    LabeledNodes leftover;
    if (traits.dual_head) {
      std::vector<NodeId> rest;
      for (NodeId v : candidates) {
        if (!partition.is_pseudo(v)) rest.push_back(v);
      }
      for (const PseudoLabel& pl : assign_pseudo_labels(mixed, rest)) leftover.add(pl.node, pl.label);
    }

    const TrainResult trained =
        train_dual(init, adj1, x, labeled, pseudo, leftover, validation, train_cfg);
    current = trained.params;
    fwd = forward(current, adj1, x);
    const std::vector<ClassId> pred = argmax_rows(fwd.logits);

    std::vector<NodeId> local = partition.labeled();
    local.insert(local.end(), partition.pseudo().begin(), partition.pseudo().end());
    const ShiftSnapshot shift = measure_shift(graph, fwd, overrides, local, true_h, cfg.n_bins);
    rep.pseudo_total = pseudo.size();
    rep.pseudo_mean_est_homophily =
        std::accumulate(pseudo_est_h.begin(), pseudo_est_h.end(), 0.0) /
        static_cast<double>(pseudo_est_h.size());
    rep.pseudo_mean_true_homophily = mean_of(true_h, pseudo.nodes);
    rep.global_mean_est_homophily = shift.global_mean_est;
    rep.kl_local_global = shift.kl_est;
    rep.kl_local_global_true = shift.kl_true;
    rep.cmd_local_global = shift.cmd;
    rep.pseudo_label_accuracy = static_cast<double>(correct) / static_cast<double>(pseudo.size());
    rep.validation_accuracy = accuracy(pred, validation);
    rep.test_accuracy = accuracy(pred, test);

    if (rep.validation_accuracy >= best_val) {
      best_params = current;
      best_pred = pred;
      best_stage = s;
    }
    if (rep.validation_accuracy > best_val) {
      best_val = rep.validation_accuracy;
      stale = 0;
    } else {
      ++stale;
    }
    report.stages.push_back(std::move(rep));
    if (stale >= cfg.patience) break;
  }

  report.best_stage = best_stage;
  report.last_stage = report.stages.back().stage;
  report.pseudo_nodes = partition.pseudo();
  report.predictions = best_pred;
  report.bins = make_bin_report(backbone_pred, best_pred, graph, partition, cfg.n_bins);
  outcome.params = std::move(best_params);
  return outcome;
}

RunOutcome run_variant(const Graph& graph, const NodePartition& partition, const RunConfig& cfg,
                       const WarningSink& warn) {
  return run_self_training(graph, partition, cfg, warn);
}

}  // namespace hcgst
