// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "hcgst/error.hpp"
#include "hcgst/homophily.hpp"
#include "hcgst/shift_metrics.hpp"
#include "hcgst/synthgen.hpp"

using namespace hcgst;

namespace {

SynthConfig small_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.n = 300;
  cfg.seed = seed;
  return cfg;
}

double training_kl(const Graph& g, const std::vector<NodeId>& nodes) {
  const std::vector<double> h = true_node_homophily_all(g);
  std::vector<double> local;
  for (NodeId v : nodes) local.push_back(h[static_cast<std::size_t>(v)]);
  return kl_divergence(bin_distribution(local, 10).counts, bin_distribution(h, 10).counts);
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
  const Graph a = generate_graph(small_config(7));
  const Graph b = generate_graph(small_config(7));
  CHECK(a.edges() == b.edges());
  CHECK(a.features() == b.features());
  CHECK(a.labels() == b.labels());
  const Graph c = generate_graph(small_config(8));
  CHECK_FALSE(a.edges() == c.edges());
}

TEST_CASE("generated graphs hit the requested size and classes") {
  const SynthConfig cfg = small_config(1);
  const Graph g = generate_graph(cfg);
  CHECK(g.num_nodes() == 300);
  CHECK(g.num_classes() == 3);
  CHECK(g.feature_dim() == 16);
  const double mean_degree = 2.0 * static_cast<double>(g.num_edges()) / 300.0;
  CHECK(mean_degree == doctest::Approx(8.0).epsilon(0.1));
  std::set<ClassId> seen(g.labels().begin(), g.labels().end());
  CHECK(seen.size() == 3);
}

TEST_CASE("extreme histograms give extreme graph homophily") {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    SynthConfig hi = small_config(seed);
    hi.separation = 5.0;
    hi.target_histogram = {0, 0, 0, 0, 0, 0, 0, 0, 0, 1};
    CHECK(graph_homophily(generate_graph(hi)) >= 0.8);
    SynthConfig lo = small_config(seed);
    lo.target_histogram = {1, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    CHECK(graph_homophily(generate_graph(lo)) <= 0.2);
  }
}

TEST_CASE("graph homophily grows with the histogram's mean") {
  const std::vector<std::vector<double>> histograms = {
      {3, 3, 2, 1, 1, 0, 0, 0, 0, 0}, {1, 1, 1, 1, 1, 1, 1, 1, 1, 1}, {0, 0, 0, 0, 0, 1, 1, 2, 3, 3}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    double previous = -1.0;
    for (const auto& hist : histograms) {
      SynthConfig cfg = small_config(seed);
      cfg.target_histogram = hist;
      const double h = graph_homophily(generate_graph(cfg));
      CHECK(h > previous);
      previous = h;
    }
  }
}

TEST_CASE("invalid configs are rejected") {
  SynthConfig cfg = small_config(0);
  cfg.mean_degree = 400;
  CHECK_THROWS_AS(generate_graph(cfg), InputError);
  cfg = small_config(0);
  cfg.target_histogram = {0, 0};
  CHECK_THROWS_AS(generate_graph(cfg), InputError);
  cfg.target_histogram = {1, -1};
  CHECK_THROWS_AS(generate_graph(cfg), InputError);
  cfg = small_config(0);
  cfg.classes = 1;
  CHECK_THROWS_AS(generate_graph(cfg), InputError);
  CHECK_THROWS_AS(parse_bias_mode("sideways"), InputError);
}

TEST_CASE("sampler returns floor(rate * n) distinct nodes") {
  const Graph g = generate_graph(small_config(2));
  for (BiasMode mode :
       {BiasMode::kHomophilyBiased, BiasMode::kRepresentative, BiasMode::kHeterophilyBiased}) {
    const TrainingSample s = sample_training_set(g, 0.05, mode, 10, 3);
    CHECK(s.nodes.size() == 15);
    std::set<NodeId> uniq(s.nodes.begin(), s.nodes.end());
    CHECK(uniq.size() == 15);
    CHECK(s.nodes == sample_training_set(g, 0.05, mode, 10, 3).nodes);
  }
  CHECK_THROWS_AS(sample_training_set(g, 0.005, BiasMode::kRepresentative, 10, 0), InputError);
}

TEST_CASE("biased samplers stay in their bins") {
  const Graph g = generate_graph(small_config(4));
  const std::vector<double> h = true_node_homophily_all(g);
  const TrainingSample top = sample_training_set(g, 0.03, BiasMode::kHomophilyBiased, 10, 1);
  int outside = 0;
  for (NodeId v : top.nodes) outside += bin_index(h[static_cast<std::size_t>(v)], 10) >= 6 ? 0 : 1;
  CHECK(outside <= top.fallback_events);

  const TrainingSample bottom = sample_training_set(g, 0.03, BiasMode::kHeterophilyBiased, 10, 1);
  outside = 0;
  for (NodeId v : bottom.nodes) outside += bin_index(h[static_cast<std::size_t>(v)], 10) <= 3 ? 0 : 1;
  CHECK(outside <= bottom.fallback_events);
}

TEST_CASE("representative sets track the global histogram more closely") {
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    SynthConfig cfg = small_config(seed);
    cfg.n = 500;
    const Graph g = generate_graph(cfg);
    const double rep = training_kl(g, sample_training_set(g, 0.04, BiasMode::kRepresentative, 10, seed).nodes);
    const double homo = training_kl(g, sample_training_set(g, 0.04, BiasMode::kHomophilyBiased, 10, seed).nodes);
    const double het = training_kl(g, sample_training_set(g, 0.04, BiasMode::kHeterophilyBiased, 10, seed).nodes);
    wins += (rep < homo && rep < het) ? 1 : 0;
  }
  CHECK(wins >= 9);
}

TEST_CASE("config JSON round trip and written directory") {
  SynthConfig cfg = small_config(5);
  cfg.target_histogram = {1, 2, 3};
  cfg.paired_classes = true;
  const SynthConfig back = synth_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));

  const auto dir = std::filesystem::temp_directory_path() / "hcgst_synth_test";
  std::filesystem::remove_all(dir);
  const Graph g = generate_graph(cfg);
  write_synthetic(cfg, g, dir);
  CHECK(std::filesystem::exists(dir / "meta.json"));
  const Graph loaded = load_graph_dir(dir);
  CHECK(loaded.edges() == g.edges());
  CHECK(loaded.labels() == g.labels());
  std::filesystem::remove_all(dir);
}
