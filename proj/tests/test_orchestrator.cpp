// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>
#include <set>

#include "hcgst/error.hpp"
#include "hcgst/orchestrator.hpp"
#include "hcgst/synthgen.hpp"

using namespace hcgst;

namespace {

struct Fixture {
  Graph graph;
  NodePartition partition;
};

Fixture make_fixture(std::uint64_t seed) {
  SynthConfig sc;
  sc.n = 200;
  sc.separation = 2.0;
  sc.seed = seed;
  Graph g = generate_graph(sc);
  auto labeled = sample_training_set(g, 0.03, BiasMode::kHeterophilyBiased, 10, seed).nodes;
  NodePartition p = make_partition(g, labeled, 20, seed + 1);
  return {std::move(g), std::move(p)};
}

RunConfig quick_config(Variant v) {
  RunConfig cfg;
  cfg.variant = v;
  cfg.stages = 3;
  cfg.hidden = 16;
  cfg.train.epochs = 60;
  cfg.train.learning_rate = 0.01;
  cfg.selection.iterations = 50;
  cfg.patience = 3;
  return cfg;
}

}  // namespace

TEST_CASE("bias metric examples") {
  const std::vector<double> backbone = {50, 50};
  const std::vector<double> a = {52, 46};
  const BiasMetrics m = bias_metrics(a, backbone);
  CHECK(m.tpv == doctest::Approx(-1.0));
  CHECK(m.npv == doctest::Approx(-4.0));
  CHECK(m.ppv == doctest::Approx(2.0));

  const std::vector<double> b = {56, 48};
  const BiasMetrics n = bias_metrics(b, backbone);
  CHECK(n.tpv == doctest::Approx(2.0));
  CHECK(n.npv == doctest::Approx(-2.0));
  CHECK(n.ppv == doctest::Approx(6.0));

  const BiasMetrics z = bias_metrics(backbone, backbone);
  CHECK(z.tpv == 0.0);
  CHECK(z.npv == 0.0);
  CHECK(z.ppv == 0.0);
}

TEST_CASE("bias metrics: NPV <= TPV <= PPV when both signs occur") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(6), b(6);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    const BiasMetrics m = bias_metrics(a, b);
    CHECK(m.npv <= 0.0);
    CHECK(m.ppv >= 0.0);
    if (m.npv < 0.0 && m.ppv > 0.0) {
      CHECK(m.tpv >= m.npv);
      CHECK(m.tpv <= m.ppv);
    }
  }
}

TEST_CASE("per-bin accuracy examples") {
  const std::vector<ClassId> truth = {0, 1, 0, 1, 1};
  const std::vector<double> h = {0.05, 0.05, 0.05, 0.05, 0.95};
  const std::vector<NodeId> test = {0, 1, 2, 3};
  const std::vector<ClassId> half = {0, 0, 0, 0, 0};
  const BinAccuracy a = per_bin_accuracy(half, truth, h, 10, test);
  CHECK(a.accuracy[0] == 0.5);
  CHECK(a.count[0] == 4);
  for (std::size_t b = 1; b < 10; ++b) CHECK(a.empty(b));

  const std::vector<NodeId> all = {0, 1, 2, 3, 4};
  const BinAccuracy perfect = per_bin_accuracy(truth, truth, h, 10, all);
  CHECK(perfect.accuracy[0] == 1.0);
  CHECK(perfect.accuracy[9] == 1.0);
}

TEST_CASE("run config validation") {
  RunConfig cfg;
  cfg.stages = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = RunConfig{};
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = RunConfig{};
  cfg.delta_c = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  CHECK_THROWS_AS(parse_variant("everything"), InputError);
  for (Variant v : all_variants()) CHECK(parse_variant(to_string(v)) == v);
}

TEST_CASE("backbone_only has zero deltas and no stages") {
  const Fixture f = make_fixture(0);
  const RunReport r = run_variant(f.graph, f.partition, quick_config(Variant::kBackboneOnly)).report;
  CHECK(r.stages.size() == 1);
  CHECK(r.pseudo_nodes.empty());
  for (double d : r.bins.delta) CHECK(d == 0.0);
  CHECK(r.bins.bias.tpv == 0.0);
  CHECK(r.bins.bias.npv == 0.0);
  CHECK(r.bins.bias.ppv == 0.0);
  CHECK(r.bins.accuracy == r.bins.backbone_accuracy);
}

TEST_CASE("an unreachable confidence threshold reproduces the backbone") {
  const Fixture f = make_fixture(1);
  RunConfig cfg = quick_config(Variant::kHcgst);
  cfg.stages = 1;
  cfg.delta_c = 0.999;
  // A briefly trained backbone stays far from 0.999 confidence.
  cfg.train.epochs = 5;
  std::vector<std::string> warnings;
  const RunOutcome hc = run_variant(f.graph, f.partition, cfg, [&](const std::string& w) { warnings.push_back(w); });
  RunConfig backbone = quick_config(Variant::kBackboneOnly);
  backbone.train.epochs = 5;
  const RunOutcome bb = run_variant(f.graph, f.partition, backbone);
  CHECK(hc.report.predictions == bb.report.predictions);
  CHECK(hc.report.bins.accuracy == bb.report.bins.accuracy);
  CHECK(hc.report.stages.at(1).skipped);
  CHECK(warnings.size() == 1);
}

TEST_CASE("pseudo set grows by at most K per stage without duplicates") {
  for (Variant v : {Variant::kHcgst, Variant::kStConfidence, Variant::kCmdOnly}) {
    const Fixture f = make_fixture(2);
    const RunReport r = run_variant(f.graph, f.partition, quick_config(v)).report;
    const std::size_t k = f.partition.labeled().size();
    std::set<NodeId> seen;
    std::size_t running = 0;
    for (std::size_t s = 1; s < r.stages.size(); ++s) {
      CHECK(r.stages[s].selected.size() <= k);
      for (const PseudoLabel& pl : r.stages[s].selected) {
        CHECK(seen.insert(pl.node).second);
        CHECK_FALSE(f.partition.is_labeled(pl.node));
        CHECK_FALSE(f.partition.is_validation(pl.node));
      }
      running += r.stages[s].selected.size();
      CHECK(r.stages[s].pseudo_total == running);
    }
    CHECK(r.pseudo_nodes.size() == running);
    CHECK(std::set<NodeId>(r.pseudo_nodes.begin(), r.pseudo_nodes.end()) == seen);
  }
}

TEST_CASE("no_multihop never routes to the multi-hop output") {
  const Fixture f = make_fixture(3);
  const RunReport r = run_variant(f.graph, f.partition, quick_config(Variant::kNoMultihop)).report;
  for (const StageReport& s : r.stages) {
    CHECK(s.multi_hop_routed == 0);
    for (const PseudoLabel& pl : s.selected) CHECK(pl.source == OutputSource::kOneHop);
  }
}

TEST_CASE("no_dualhead leaves the pseudo head at its initialization") {
  const Fixture f = make_fixture(4);
  const RunConfig cfg = quick_config(Variant::kNoDualhead);
  const RunOutcome out = run_variant(f.graph, f.partition, cfg);
  const ModelParams init = init_params(f.graph.feature_dim(), cfg.hidden, f.graph.num_classes(), cfg.seed);
  CHECK(out.params.pseudo_w == init.pseudo_w);
  CHECK(out.params.pseudo_b == init.pseudo_b);

  const RunOutcome dual = run_variant(f.graph, f.partition, quick_config(Variant::kHcgst));
  if (dual.report.best_stage > 0) CHECK_FALSE(dual.params.pseudo_w == init.pseudo_w);
}

TEST_CASE("runs are deterministic") {
  const Fixture f = make_fixture(5);
  const RunConfig cfg = quick_config(Variant::kHcgst);
  const nlohmann::json a = to_json(run_variant(f.graph, f.partition, cfg).report);
  const nlohmann::json b = to_json(run_variant(f.graph, f.partition, cfg).report);
  CHECK(a.dump() == b.dump());
}

TEST_CASE("run config JSON round trip") {
  RunConfig cfg = quick_config(Variant::kCmdOnly);
  cfg.k = 7;
  cfg.seed = 99;
  const RunConfig back = run_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK_THROWS_AS(run_config_from_json(nlohmann::json{{"stages", "many"}}), InputError);
}

TEST_CASE("make_partition draws validation nodes outside the labeled set") {
  const Fixture f = make_fixture(6);
  CHECK(f.partition.validation().size() == 20);
  for (NodeId v : f.partition.validation()) CHECK_FALSE(f.partition.is_labeled(v));
  CHECK(f.partition.test().size() ==
        f.graph.num_nodes() - f.partition.labeled().size() - f.partition.validation().size());
}
