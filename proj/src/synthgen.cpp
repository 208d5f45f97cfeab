// SPDX-License-Identifier: Apache-2.0
#include "hcgst/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include "hcgst/error.hpp"
#include "hcgst/homophily.hpp"

namespace hcgst {

void SynthConfig::validate() const {
  if (n < 2) throw InputError("synthetic graph needs n >= 2");
  if (classes < 2) throw InputError("synthetic graph needs at least 2 classes");
  if (feature_dim < 1) throw InputError("feature_dim must be >= 1");
  if (!(mean_degree > 0.0)) throw InputError("mean_degree must be > 0");
  if (mean_degree > static_cast<double>(n - 1)) {
    throw InputError("mean_degree " + std::to_string(mean_degree) + " is infeasible for n = " +
                     std::to_string(n));
  }
  if (target_histogram.empty()) throw InputError("target_histogram must not be empty");
  double total = 0.0;
  for (double w : target_histogram) {
    if (!std::isfinite(w) || w < 0.0) throw InputError("target_histogram entries must be >= 0");
    total += w;
  }
  if (!(total > 0.0)) throw InputError("target_histogram must have a positive sum");
  if (!(separation >= 0.0)) throw InputError("separation must be >= 0");
}

std::string to_string(BiasMode mode) {
  switch (mode) {
    case BiasMode::kHomophilyBiased: return "homophily_biased";
    case BiasMode::kRepresentative: return "representative";
    case BiasMode::kHeterophilyBiased: return "heterophily_biased";
  }
  return "unknown";
}

BiasMode parse_bias_mode(const std::string& text) {
  if (text == "homophily_biased") return BiasMode::kHomophilyBiased;
  if (text == "representative") return BiasMode::kRepresentative;
  if (text == "heterophily_biased") return BiasMode::kHeterophilyBiased;
  throw InputError("unknown bias mode '" + text + "'");
}

Graph generate_graph(const SynthConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  const auto n = static_cast<std::size_t>(cfg.n);
  const int bins = static_cast<int>(cfg.target_histogram.size());

  std::uniform_int_distribution<int> pick_class(0, cfg.classes - 1);
  std::vector<ClassId> labels(n);
  for (auto& y : labels) y = pick_class(rng);

  std::discrete_distribution<int> pick_bin(cfg.target_histogram.begin(),
                                           cfg.target_histogram.end());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> target_h(n);
  for (auto& h : target_h) {
    const int b = pick_bin(rng);
    h = std::min(1.0, (static_cast<double>(b) + unit(rng)) / static_cast<double>(bins));
  }

  std::vector<std::vector<NodeId>> by_class(static_cast<std::size_t>(cfg.classes));
  for (std::size_t v = 0; v < n; ++v) by_class[static_cast<std::size_t>(labels[v])].push_back(static_cast<NodeId>(v));

  // Rejection-sample a partner of the requested kind, accepting v with
  // probability h_v (same class) or 1 - h_v (cross class), floored so that
  // extreme targets cannot stall the sampler.
  constexpr double kAcceptFloor = 0.05;
  constexpr int kMaxTries = 64;
  auto draw_partner = [&](NodeId u, bool same) -> NodeId {
    const ClassId yu = labels[static_cast<std::size_t>(u)];
    for (int t = 0; t < kMaxTries; ++t) {
      NodeId v;
      if (same) {
        const auto& pool = by_class[static_cast<std::size_t>(yu)];
        if (pool.size() < 2) return -1;
        v = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
      } else {
        const ClassId partner = yu ^ 1;
        if (cfg.paired_classes && partner < cfg.classes) {
          const auto& pool = by_class[static_cast<std::size_t>(partner)];
          if (pool.empty()) return -1;
          v = pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)];
        } else {
          v = static_cast<NodeId>(std::uniform_int_distribution<std::size_t>(0, n - 1)(rng));
          if (labels[static_cast<std::size_t>(v)] == yu) continue;
        }
      }
      if (v == u) continue;
      const double hv = target_h[static_cast<std::size_t>(v)];
      const double accept = std::max(same ? hv : 1.0 - hv, kAcceptFloor);
      if (unit(rng) < accept) return v;
    }
    return -1;
  };

  const auto target_edges = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * cfg.mean_degree / 2.0));
  std::set<std::pair<NodeId, NodeId>> edge_set;
  std::vector<NodeId> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t stalled_rounds = 0;
  while (edge_set.size() < target_edges && stalled_rounds < 100) {
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t before = edge_set.size();
    for (NodeId u : order) {
      if (edge_set.size() >= target_edges) break;
      const bool same = unit(rng) < target_h[static_cast<std::size_t>(u)];
      NodeId v = draw_partner(u, same);
      if (v < 0) v = draw_partner(u, !same);
      if (v < 0) continue;
      edge_set.emplace(std::min(u, v), std::max(u, v));
    }
    stalled_rounds = (edge_set.size() == before) ? stalled_rounds + 1 : 0;
  }

  std::vector<Edge> edges;
  edges.reserve(edge_set.size());
  for (const auto& [a, b] : edge_set) edges.push_back({a, b});

  // Class means: scaled basis vectors when d >= c, random unit vectors otherwise.
  Matrix means = Matrix::Zero(cfg.classes, cfg.feature_dim);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int c = 0; c < cfg.classes; ++c) {
    if (cfg.feature_dim >= cfg.classes) {
      means(c, c) = 1.0;
    } else {
      for (int j = 0; j < cfg.feature_dim; ++j) means(c, j) = gauss(rng);
      means.row(c).normalize();
    }
  }
  means *= cfg.separation;
  Matrix features(cfg.n, cfg.feature_dim);
  for (std::size_t v = 0; v < n; ++v) {
    const auto row = static_cast<Eigen::Index>(v);
    for (int j = 0; j < cfg.feature_dim; ++j) {
      features(row, j) = means(labels[v], j) + gauss(rng);
    }
  }
  return Graph::build(edges, std::move(features), std::move(labels), cfg.classes);
}

TrainingSample sample_training_set(const Graph& graph, double label_rate, BiasMode mode,
                                   int n_bins, std::uint64_t seed) {
  const std::size_t n = graph.num_nodes();
  if (n == 0) throw InputError("cannot sample a training set from an empty graph");
  if (n_bins < 1) throw InputError("bin count must be >= 1");
  if (!(label_rate > 0.0 && label_rate <= 1.0)) throw InputError("label_rate must lie in (0, 1]");
  const auto budget = static_cast<std::size_t>(std::floor(label_rate * static_cast<double>(n)));
  if (budget < static_cast<std::size_t>(std::max(graph.num_classes(), 1))) {
    throw InputError("label_rate * n must be at least the class count");
  }
  const auto& labels = graph.labels();

  const std::vector<double> h = true_node_homophily_all(graph);
  std::vector<std::vector<NodeId>> bins(static_cast<std::size_t>(n_bins));
  for (std::size_t v = 0; v < n; ++v) {
    bins[static_cast<std::size_t>(bin_index(h[v], n_bins))].push_back(static_cast<NodeId>(v));
  }

  // Per-bin quotas summing to the budget (largest-remainder rounding).
  std::vector<double> weight(static_cast<std::size_t>(n_bins), 0.0);
  const int span = std::min(4, n_bins);
  for (int i = 0; i < n_bins; ++i) {
    const double count = static_cast<double>(bins[static_cast<std::size_t>(i)].size());
    const bool in_top = i >= n_bins - span;
    const bool in_bottom = i < span;
    switch (mode) {
      case BiasMode::kRepresentative: weight[static_cast<std::size_t>(i)] = count; break;
      case BiasMode::kHomophilyBiased: weight[static_cast<std::size_t>(i)] = in_top ? count : 0.0; break;
      case BiasMode::kHeterophilyBiased: weight[static_cast<std::size_t>(i)] = in_bottom ? count : 0.0; break;
    }
  }
  double weight_total = std::accumulate(weight.begin(), weight.end(), 0.0);
  if (!(weight_total > 0.0)) {
    // Requested bins are all empty; spread uniformly over them and let the
    // fallback rule find nodes.
    for (int i = 0; i < n_bins; ++i) {
      const bool in_top = i >= n_bins - span;
      const bool in_bottom = i < span;
      const bool wanted = mode == BiasMode::kRepresentative ||
                          (mode == BiasMode::kHomophilyBiased && in_top) ||
                          (mode == BiasMode::kHeterophilyBiased && in_bottom);
      weight[static_cast<std::size_t>(i)] = wanted ? 1.0 : 0.0;
    }
    weight_total = std::accumulate(weight.begin(), weight.end(), 0.0);
  }
  std::vector<std::size_t> quota(static_cast<std::size_t>(n_bins), 0);
  std::vector<std::pair<double, int>> remainders;
  std::size_t assigned = 0;
  for (int i = 0; i < n_bins; ++i) {
    const double exact = weight[static_cast<std::size_t>(i)] / weight_total * static_cast<double>(budget);
    quota[static_cast<std::size_t>(i)] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[static_cast<std::size_t>(i)];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t r = 0; assigned < budget; ++r, ++assigned) {
    quota[static_cast<std::size_t>(remainders[r % remainders.size()].second)] += 1;
  }

  std::mt19937_64 rng(seed);
  for (auto& b : bins) std::shuffle(b.begin(), b.end(), rng);

  TrainingSample sample;
  std::vector<char> class_seen(static_cast<std::size_t>(std::max(graph.num_classes(), 1)), 0);
  // Takes one node from bin i, preferring classes not yet represented.
  auto take_from = [&](std::size_t i) {
    auto& pool = bins[i];
    auto it = std::find_if(pool.begin(), pool.end(), [&](NodeId v) {
      return !class_seen[static_cast<std::size_t>(labels[static_cast<std::size_t>(v)])];
    });
    if (it == pool.end()) it = pool.begin();
    const NodeId v = *it;
    pool.erase(it);
    class_seen[static_cast<std::size_t>(labels[static_cast<std::size_t>(v)])] = 1;
    sample.nodes.push_back(v);
  };

  for (int i = 0; i < n_bins; ++i) {
    for (std::size_t draw = 0; draw < quota[static_cast<std::size_t>(i)]; ++draw) {
      if (!bins[static_cast<std::size_t>(i)].empty()) {
        take_from(static_cast<std::size_t>(i));
        continue;
      }
      // Nearest non-empty bin; lower index wins at equal distance.
      int chosen = -1;
      for (int dist = 1; dist < n_bins && chosen < 0; ++dist) {
        for (int j : {i - dist, i + dist}) {
          if (j >= 0 && j < n_bins && !bins[static_cast<std::size_t>(j)].empty()) {
            chosen = j;
            break;
          }
        }
      }
      if (chosen < 0) break;
      ++sample.fallback_events;
      take_from(static_cast<std::size_t>(chosen));
    }
  }
  return sample;
}

nlohmann::json to_json(const SynthConfig& cfg) {
  return nlohmann::json{{"n", cfg.n},
                        {"classes", cfg.classes},
                        {"feature_dim", cfg.feature_dim},
                        {"mean_degree", cfg.mean_degree},
                        {"target_histogram", cfg.target_histogram},
                        {"separation", cfg.separation},
                        {"paired_classes", cfg.paired_classes},
                        {"seed", cfg.seed}};
}

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig cfg;
  try {
    cfg.n = j.value("n", cfg.n);
    cfg.classes = j.value("classes", cfg.classes);
    cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
    cfg.mean_degree = j.value("mean_degree", cfg.mean_degree);
    cfg.target_histogram = j.value("target_histogram", cfg.target_histogram);
    cfg.separation = j.value("separation", cfg.separation);
    cfg.paired_classes = j.value("paired_classes", cfg.paired_classes);
    cfg.seed = j.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid synthetic config: ") + e.what());
  }
  return cfg;
}

nlohmann::json synth_meta(const SynthConfig& cfg, const Graph& graph) {
  const std::vector<double> h = true_node_homophily_all(graph);
  const int bins = static_cast<int>(cfg.target_histogram.size());
  const HomophilyDistribution dist = bin_distribution(h, bins);
  double degree_sum = 0.0;
  for (std::size_t v = 0; v < graph.num_nodes(); ++v) {
    degree_sum += static_cast<double>(graph.degree(static_cast<NodeId>(v)));
  }
  return nlohmann::json{
      {"config", to_json(cfg)},
      {"measured",
       {{"nodes", graph.num_nodes()},
        {"edges", graph.num_edges()},
        {"mean_degree", degree_sum / static_cast<double>(graph.num_nodes())},
        {"graph_homophily", graph_homophily(graph)},
        {"homophily_histogram", dist.counts}}}};
}

void write_synthetic(const SynthConfig& cfg, const Graph& graph, const std::filesystem::path& dir) {
  save_graph_dir(graph, dir);
  std::ofstream out(dir / "meta.json", std::ios::binary);
  out << synth_meta(cfg, graph).dump(2) << '\n';
}

}  // namespace hcgst
