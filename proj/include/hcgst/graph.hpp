// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace hcgst {

using NodeId = std::int32_t;
using ClassId = std::int32_t;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct Edge {
  NodeId src = 0;
  NodeId dst = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Immutable undirected attributed graph. Edges are stored once per
/// unordered pair with src < dst; neighbor lists are sorted.
class Graph {
 public:
  /// Symmetrizes, drops self-loops and duplicate pairs. The node count is the
  /// feature row count. Throws RecordError naming the offending edge or label.
  static Graph build(std::span<const Edge> edges, Matrix features,
                     std::optional<std::vector<ClassId>> labels = std::nullopt,
                     std::optional<int> num_classes = std::nullopt);

  std::size_t num_nodes() const noexcept { return neighbors_.size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }
  int num_classes() const noexcept { return num_classes_; }
  Eigen::Index feature_dim() const noexcept { return features_.cols(); }

  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const Matrix& features() const noexcept { return features_; }
  bool has_labels() const noexcept { return labels_.has_value(); }
  /// Throws InputError when the graph carries no labels.
  const std::vector<ClassId>& labels() const;

  std::span<const NodeId> neighbors(NodeId v) const { return neighbors_.at(v); }
  std::size_t degree(NodeId v) const { return neighbors_.at(v).size(); }

 private:
  Graph() = default;

  std::vector<Edge> edges_;
  std::vector<std::vector<NodeId>> neighbors_;
  Matrix features_;
  std::optional<std::vector<ClassId>> labels_;
  int num_classes_ = 0;
};

/// Neighbor structure of the k-th adjacency power, binarized with the diagonal
/// removed. Also carries the self-loop augmented, symmetric-degree-normalized
/// propagation matrix used by the model.
class AdjacencyView {
 public:
  int hop() const noexcept { return hop_; }
  std::size_t num_nodes() const noexcept { return neighbors_.size(); }
  std::span<const NodeId> neighbors(NodeId v) const { return neighbors_.at(v); }
  bool connected(NodeId u, NodeId v) const;
  /// D^{-1/2} (A + I) D^{-1/2} over this view's neighbor structure.
  const SparseMatrix& normalized() const noexcept { return normalized_; }

 private:
  friend AdjacencyView k_hop_adjacency(const Graph& graph, int k);

  int hop_ = 1;
  std::vector<std::vector<NodeId>> neighbors_;
  SparseMatrix normalized_;
};

AdjacencyView k_hop_adjacency(const Graph& graph, int k);

/// Fraction of 1-hop neighbors sharing the node's label; 0 for isolated nodes.
double true_node_homophily(const Graph& graph, NodeId node);
std::vector<double> true_node_homophily_all(const Graph& graph);
/// Unweighted mean of node homophily over all nodes.
double graph_homophily(const Graph& graph);

/// Labeled / validation / unlabeled split plus the ordered, stage-tagged
/// pseudo set. All four sets stay pairwise disjoint.
class NodePartition {
 public:
  NodePartition(std::size_t num_nodes, std::vector<NodeId> labeled,
                std::vector<NodeId> validation);

  std::size_t num_nodes() const noexcept { return role_.size(); }
  const std::vector<NodeId>& labeled() const noexcept { return labeled_; }
  const std::vector<NodeId>& validation() const noexcept { return validation_; }
  /// Nodes neither labeled, validation, nor pseudo-labeled.
  std::vector<NodeId> unlabeled() const;
  /// Unlabeled at construction time; the evaluation set. Pseudo nodes stay in it.
  const std::vector<NodeId>& test() const noexcept { return test_; }

  const std::vector<NodeId>& pseudo() const noexcept { return pseudo_; }
  const std::vector<int>& pseudo_stage() const noexcept { return pseudo_stage_; }

  bool is_labeled(NodeId v) const { return role_.at(v) == Role::kLabeled; }
  bool is_validation(NodeId v) const { return role_.at(v) == Role::kValidation; }
  bool is_pseudo(NodeId v) const { return role_.at(v) == Role::kPseudo; }

  /// Moves unlabeled nodes into the pseudo set. Throws if any node is not
  /// currently unlabeled.
  void add_pseudo(std::span<const NodeId> nodes, int stage);

 private:
  enum class Role : std::uint8_t { kUnlabeled, kLabeled, kValidation, kPseudo };

  std::vector<Role> role_;
  std::vector<NodeId> labeled_;
  std::vector<NodeId> validation_;
  std::vector<NodeId> test_;
  std::vector<NodeId> pseudo_;
  std::vector<int> pseudo_stage_;
};

/// Directory format: edges.csv (header "src,dst"), features.csv (no header),
/// optional labels.csv (one integer per row).
Graph load_graph_dir(const std::filesystem::path& dir);
void save_graph_dir(const Graph& graph, const std::filesystem::path& dir);

}  // namespace hcgst
