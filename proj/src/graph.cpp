// SPDX-License-Identifier: Apache-2.0
#include "hcgst/graph.hpp"

#include <algorithm>
#include <cmath>
#include <charconv>
#include <fstream>
#include <string>

#include "hcgst/error.hpp"
#include "hcgst/text_io.hpp"

namespace hcgst {

Graph Graph::build(std::span<const Edge> edges, Matrix features,
                   std::optional<std::vector<ClassId>> labels,
                   std::optional<int> num_classes) {
  const auto n = static_cast<std::size_t>(features.rows());
  if (!features.allFinite()) throw InputError("features contain non-finite values");

  Graph g;
  g.neighbors_.resize(n);
  std::vector<Edge> canonical;
  canonical.reserve(edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge& e = edges[i];
    if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= n ||
        static_cast<std::size_t>(e.dst) >= n) {
      throw RecordError("edge endpoint out of range [0, " + std::to_string(n) + ")",
                        static_cast<long long>(i));
    }
    if (e.src == e.dst) continue;
    canonical.push_back({std::min(e.src, e.dst), std::max(e.src, e.dst)});
  }
  std::sort(canonical.begin(), canonical.end(), [](const Edge& a, const Edge& b) {
    return a.src != b.src ? a.src < b.src : a.dst < b.dst;
  });
  canonical.erase(std::unique(canonical.begin(), canonical.end()), canonical.end());
  for (const Edge& e : canonical) {
    g.neighbors_[e.src].push_back(e.dst);
    g.neighbors_[e.dst].push_back(e.src);
  }
  for (auto& nb : g.neighbors_) std::sort(nb.begin(), nb.end());
  g.edges_ = std::move(canonical);

  if (labels) {
    if (labels->size() != n) {
      throw RecordError("label count " + std::to_string(labels->size()) +
                            " does not match node count " + std::to_string(n),
                        static_cast<long long>(std::min(labels->size(), n)));
    }
    int c = num_classes.value_or(0);
    if (!num_classes) {
      for (ClassId y : *labels) c = std::max(c, y + 1);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if ((*labels)[i] < 0 || (*labels)[i] >= c) {
        throw RecordError("label out of range [0, " + std::to_string(c) + ")",
                          static_cast<long long>(i));
      }
    }
    g.num_classes_ = c;
    g.labels_ = std::move(labels);
  } else {
    g.num_classes_ = num_classes.value_or(0);
  }
  g.features_ = std::move(features);
  return g;
}

const std::vector<ClassId>& Graph::labels() const {
  if (!labels_) throw InputError("graph has no ground-truth labels");
  return *labels_;
}

bool AdjacencyView::connected(NodeId u, NodeId v) const {
  const auto& nb = neighbors_.at(u);
  return std::binary_search(nb.begin(), nb.end(), v);
}

AdjacencyView k_hop_adjacency(const Graph& graph, int k) {
  if (k < 1) throw InputError("hop k must be >= 1, got " + std::to_string(k));
  const std::size_t n = graph.num_nodes();

  AdjacencyView view;
  view.hop_ = k;
  view.neighbors_.resize(n);
  if (k == 1) {
    for (std::size_t v = 0; v < n; ++v) {
      const auto nb = graph.neighbors(static_cast<NodeId>(v));
      view.neighbors_[v].assign(nb.begin(), nb.end());
    }
  } else {
    // Support of row v of A^k is the set reachable by walks of length exactly k.
    std::vector<char> mark(n, 0);
    std::vector<NodeId> frontier, next;
    for (std::size_t v = 0; v < n; ++v) {
      frontier.assign(1, static_cast<NodeId>(v));
      for (int step = 0; step < k; ++step) {
        next.clear();
        for (NodeId u : frontier) {
          for (NodeId w : graph.neighbors(u)) {
            if (!mark[w]) {
              mark[w] = 1;
              next.push_back(w);
            }
          }
        }
        for (NodeId w : next) mark[w] = 0;
        frontier.swap(next);
      }
      auto& out = view.neighbors_[v];
      for (NodeId w : frontier) {
        if (w != static_cast<NodeId>(v)) out.push_back(w);
      }
      std::sort(out.begin(), out.end());
    }
  }

  std::vector<double> inv_sqrt(n);
  for (std::size_t v = 0; v < n; ++v) {
    inv_sqrt[v] = 1.0 / std::sqrt(static_cast<double>(view.neighbors_[v].size() + 1));
  }
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t v = 0; v < n; ++v) {
    const auto row = static_cast<Eigen::Index>(v);
    trip.emplace_back(row, row, inv_sqrt[v] * inv_sqrt[v]);
    for (NodeId w : view.neighbors_[v]) trip.emplace_back(row, w, inv_sqrt[v] * inv_sqrt[w]);
  }
  view.normalized_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  view.normalized_.setFromTriplets(trip.begin(), trip.end());
  view.normalized_.makeCompressed();
  return view;
}

double true_node_homophily(const Graph& graph, NodeId node) {
  const auto& y = graph.labels();
  const auto nb = graph.neighbors(node);
  if (nb.empty()) return 0.0;
  std::size_t same = 0;
  for (NodeId u : nb) same += (y[u] == y[node]) ? 1 : 0;
  return static_cast<double>(same) / static_cast<double>(nb.size());
}

std::vector<double> true_node_homophily_all(const Graph& graph) {
  std::vector<double> out(graph.num_nodes());
  for (std::size_t v = 0; v < out.size(); ++v) {
    out[v] = true_node_homophily(graph, static_cast<NodeId>(v));
  }
  return out;
}

double graph_homophily(const Graph& graph) {
  graph.labels();
  if (graph.num_nodes() == 0) return 0.0;
  double sum = 0.0;
  for (double h : true_node_homophily_all(graph)) sum += h;
  return sum / static_cast<double>(graph.num_nodes());
}

NodePartition::NodePartition(std::size_t num_nodes, std::vector<NodeId> labeled,
                             std::vector<NodeId> validation)
    : role_(num_nodes, Role::kUnlabeled),
      labeled_(std::move(labeled)),
      validation_(std::move(validation)) {
  auto claim = [&](const std::vector<NodeId>& nodes, Role role, const char* what) {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const NodeId v = nodes[i];
      if (v < 0 || static_cast<std::size_t>(v) >= num_nodes) {
        throw RecordError(std::string(what) + " node out of range", static_cast<long long>(i));
      }
      if (role_[v] != Role::kUnlabeled) {
        throw RecordError(std::string(what) + " node " + std::to_string(v) +
                              " already assigned to another set",
                          static_cast<long long>(i));
      }
      role_[v] = role;
    }
  };
  claim(labeled_, Role::kLabeled, "labeled");
  claim(validation_, Role::kValidation, "validation");
  for (std::size_t v = 0; v < num_nodes; ++v) {
    if (role_[v] == Role::kUnlabeled) test_.push_back(static_cast<NodeId>(v));
  }
}

std::vector<NodeId> NodePartition::unlabeled() const {
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < role_.size(); ++v) {
    if (role_[v] == Role::kUnlabeled) out.push_back(static_cast<NodeId>(v));
  }
  return out;
}

void NodePartition::add_pseudo(std::span<const NodeId> nodes, int stage) {
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const NodeId v = nodes[i];
    if (v < 0 || static_cast<std::size_t>(v) >= role_.size() || role_[v] != Role::kUnlabeled) {
      throw RecordError("pseudo node is not an unlabeled node", static_cast<long long>(i));
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (nodes[j] == v) throw RecordError("duplicate pseudo node", static_cast<long long>(i));
    }
  }
  for (NodeId v : nodes) {
    role_[v] = Role::kPseudo;
    pseudo_.push_back(v);
    pseudo_stage_.push_back(stage);
  }
}

Graph load_graph_dir(const std::filesystem::path& dir) {
  const auto edge_rows = read_csv(dir / "edges.csv", /*has_header=*/true);
  std::vector<Edge> edges;
  edges.reserve(edge_rows.size());
  for (std::size_t i = 0; i < edge_rows.size(); ++i) {
    if (edge_rows[i].size() != 2) {
      throw RecordError("edges.csv row must have 2 columns", static_cast<long long>(i));
    }
    edges.push_back({static_cast<NodeId>(parse_int(edge_rows[i][0], i)),
                     static_cast<NodeId>(parse_int(edge_rows[i][1], i))});
  }

  const auto feat_rows = read_csv(dir / "features.csv", /*has_header=*/false);
  const Eigen::Index n = static_cast<Eigen::Index>(feat_rows.size());
  const Eigen::Index d = feat_rows.empty() ? 0 : static_cast<Eigen::Index>(feat_rows[0].size());
  Matrix features(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = feat_rows[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(row.size()) != d) {
      throw RecordError("features.csv row has inconsistent column count", i);
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      features(i, j) = parse_double(row[static_cast<std::size_t>(j)], static_cast<std::size_t>(i));
    }
  }

  std::optional<std::vector<ClassId>> labels;
  if (std::filesystem::exists(dir / "labels.csv")) {
    const auto label_rows = read_csv(dir / "labels.csv", /*has_header=*/false);
    labels.emplace();
    labels->reserve(label_rows.size());
    for (std::size_t i = 0; i < label_rows.size(); ++i) {
      if (label_rows[i].size() != 1) {
        throw RecordError("labels.csv row must have 1 column", static_cast<long long>(i));
      }
      labels->push_back(static_cast<ClassId>(parse_int(label_rows[i][0], i)));
    }
  }
  return Graph::build(edges, std::move(features), std::move(labels));
}

void save_graph_dir(const Graph& graph, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "edges.csv", std::ios::binary);
    out << "src,dst\n";
    for (const Edge& e : graph.edges()) out << e.src << ',' << e.dst << '\n';
  }
  {
    std::ofstream out(dir / "features.csv", std::ios::binary);
    const Matrix& x = graph.features();
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < x.cols(); ++j) {
        if (j) out << ',';
        out << format_double(x(i, j));
      }
      out << '\n';
    }
  }
  if (graph.has_labels()) {
    std::ofstream out(dir / "labels.csv", std::ios::binary);
    for (ClassId y : graph.labels()) out << y << '\n';
  }
}

}  // namespace hcgst
