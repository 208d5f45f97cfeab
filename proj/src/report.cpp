// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "hcgst/error.hpp"
#include "hcgst/orchestrator.hpp"

namespace hcgst {
namespace {

using nlohmann::json;

json loss_json(const SelectionLoss& l) {
  return json{{"total", l.total}, {"cmd", l.cmd}, {"kl", l.kl}, {"penalty", l.penalty}};
}

// NaN is not representable in JSON; emit null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json bins_json(const BinAccuracy& b) {
  json acc = json::array();
  for (std::size_t i = 0; i < b.accuracy.size(); ++i) {
    acc.push_back(b.empty(i) ? json(nullptr) : json(b.accuracy[i]));
  }
  return json{{"accuracy", acc}, {"count", b.count}};
}

}  // namespace

nlohmann::json to_json(const RunConfig& cfg) {
  json j{{"stages", cfg.stages},
         {"k", cfg.k ? json(*cfg.k) : json(nullptr)},
         {"delta_c", cfg.delta_c},
         {"delta_h", cfg.delta_h},
         {"lambda_s", cfg.lambda_s},
         {"lambda_d", cfg.lambda_d},
         {"n_bins", cfg.n_bins},
         {"hop", cfg.hop},
         {"variant", to_string(cfg.variant)},
         {"seed", cfg.seed},
         {"hidden", cfg.hidden},
         {"patience", cfg.patience},
         {"epochs", cfg.train.epochs},
         {"learning_rate", cfg.train.learning_rate},
         {"weight_decay", cfg.train.weight_decay},
         {"selection_iterations", cfg.selection.iterations},
         {"selection_step", cfg.selection.step}};
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base) {
  RunConfig cfg = std::move(base);
  try {
    cfg.stages = j.value("stages", cfg.stages);
    if (j.contains("k")) {
      if (j["k"].is_null()) cfg.k.reset();
      else cfg.k = j["k"].get<int>();
    }
    cfg.delta_c = j.value("delta_c", cfg.delta_c);
    cfg.delta_h = j.value("delta_h", cfg.delta_h);
    cfg.lambda_s = j.value("lambda_s", cfg.lambda_s);
    cfg.lambda_d = j.value("lambda_d", cfg.lambda_d);
    cfg.n_bins = j.value("n_bins", cfg.n_bins);
    cfg.hop = j.value("hop", cfg.hop);
    if (j.contains("variant")) cfg.variant = parse_variant(j["variant"].get<std::string>());
    cfg.seed = j.value("seed", cfg.seed);
    cfg.hidden = j.value("hidden", cfg.hidden);
    cfg.patience = j.value("patience", cfg.patience);
    cfg.train.epochs = j.value("epochs", cfg.train.epochs);
    cfg.train.learning_rate = j.value("learning_rate", cfg.train.learning_rate);
    cfg.train.weight_decay = j.value("weight_decay", cfg.train.weight_decay);
    cfg.selection.iterations = j.value("selection_iterations", cfg.selection.iterations);
    cfg.selection.step = j.value("selection_step", cfg.selection.step);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid run config: ") + e.what());
  }
  return cfg;
}

nlohmann::json to_json(const RunReport& report) {
  json stages = json::array();
  for (const StageReport& s : report.stages) {
    json selected = json::array();
    for (const PseudoLabel& pl : s.selected) {
      selected.push_back({{"node", pl.node},
                          {"label", pl.label},
                          {"source", pl.source == OutputSource::kMultiHop ? "multi_hop" : "one_hop"}});
    }
    json js{{"stage", s.stage},
            {"skipped", s.skipped},
            {"candidates", s.candidate_count},
            {"selected", selected},
            {"multi_hop_routed", s.multi_hop_routed},
            {"pseudo_total", s.pseudo_total},
            {"pseudo_mean_est_homophily", s.pseudo_mean_est_homophily},
            {"pseudo_mean_true_homophily", number_or_null(s.pseudo_mean_true_homophily)},
            {"global_mean_est_homophily", s.global_mean_est_homophily},
            {"kl_local_global", s.kl_local_global},
            {"kl_local_global_true", number_or_null(s.kl_local_global_true)},
            {"cmd_local_global", s.cmd_local_global},
            {"pseudo_label_accuracy", s.pseudo_label_accuracy},
            {"validation_accuracy", s.validation_accuracy},
            {"test_accuracy", s.test_accuracy}};
    if (s.selection_initial) js["selection_loss_initial"] = loss_json(*s.selection_initial);
    if (s.selection_final) js["selection_loss_final"] = loss_json(*s.selection_final);
    stages.push_back(std::move(js));
  }
  const BinReport& b = report.bins;
  return json{{"config", to_json(report.config)},
              {"best_stage", report.best_stage},
              {"last_stage", report.last_stage},
              {"stages", stages},
              {"pseudo_nodes", report.pseudo_nodes},
              {"bins",
               {{"backbone", bins_json(b.backbone)},
                {"self_trained", bins_json(b.self_trained)},
                {"delta", b.delta}}},
              {"metrics",
               {{"acc", b.accuracy},
                {"backbone_acc", b.backbone_accuracy},
                {"tpv", b.bias.tpv},
                {"npv", b.bias.npv},
                {"ppv", b.bias.ppv}}},
              {"warnings", report.warnings}};
}

}  // namespace hcgst
