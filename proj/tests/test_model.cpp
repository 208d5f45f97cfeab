// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <limits>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <numeric>
#include <random>

#include "hcgst/error.hpp"
#include "hcgst/model.hpp"
#include "test_support.hpp"

using namespace hcgst;
using hcgst::testing::dense_adjacency;
using hcgst::testing::make_graph;
using hcgst::testing::random_graph;

namespace {

LabeledNodes nodes_with_labels(const Graph& g, std::vector<NodeId> nodes) {
  LabeledNodes out;
  for (NodeId v : nodes) out.add(v, g.labels()[static_cast<std::size_t>(v)]);
  return out;
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  return a.w1 == b.w1 && a.b1 == b.b1 && a.w2 == b.w2 && a.b2 == b.b2 && a.main_w == b.main_w &&
         a.main_b == b.main_b && a.pseudo_w == b.pseudo_w && a.pseudo_b == b.pseudo_b;
}

/// Dense reference forward pass.
Matrix dense_logits(const ModelParams& p, const Eigen::MatrixXi& adj, const Matrix& x) {
  const Eigen::MatrixXd a = adj.cast<double>() + Eigen::MatrixXd::Identity(adj.rows(), adj.cols());
  const Eigen::VectorXd dinv = a.rowwise().sum().cwiseSqrt().cwiseInverse();
  const Eigen::MatrixXd s = dinv.asDiagonal() * a * dinv.asDiagonal();
  Matrix h1 = (s * x * p.w1).rowwise() + p.b1;
  h1 = h1.cwiseMax(0.0);
  const Matrix h2 = (s * h1 * p.w2).rowwise() + p.b2;
  return (h2 * p.main_w).rowwise() + p.main_b;
}

/// Two Gaussian blobs joined mostly within blob.
Graph two_blobs(std::uint64_t seed, int n) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 0.5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ClassId> y(static_cast<std::size_t>(n));
  Matrix x(n, 2);
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    x(i, 0) = (i % 2 ? 1.5 : -1.5) + g(rng);
    x(i, 1) = g(rng);
  }
  std::vector<Edge> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const double p = (a % 2 == b % 2) ? 0.3 : 0.05;
      if (u(rng) < p) edges.push_back({a, b});
    }
  }
  return Graph::build(edges, x, y, 2);
}

}  // namespace

TEST_CASE("init_params is deterministic and seed dependent") {
  const ModelParams a = init_params(4, 6, 3, 1);
  const ModelParams b = init_params(4, 6, 3, 1);
  const ModelParams c = init_params(4, 6, 3, 2);
  CHECK(same_params(a, b));
  CHECK_FALSE(same_params(a, c));
  CHECK(a.w1.rows() == 4);
  CHECK(a.w2.rows() == 6);
  CHECK(a.main_w.cols() == 3);
  CHECK(a.pseudo_w.cols() == 3);
  CHECK(a.b1.isZero());
  CHECK_THROWS_AS(init_params(4, 0, 3, 1), InputError);
  CHECK_THROWS_AS(init_params(0, 4, 3, 1), InputError);
}

TEST_CASE("softmax examples") {
  Matrix z(3, 2);
  z << 0, 0, 1000, 0, std::log(2.0), 0;
  const Matrix s = soft_labels(z);
  CHECK(s(0, 0) == doctest::Approx(0.5));
  CHECK(s(1, 0) == doctest::Approx(1.0));
  CHECK(std::isfinite(s(1, 1)));
  CHECK(s(2, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(s(2, 1) == doctest::Approx(1.0 / 3.0));
  Matrix bad = z;
  bad(0, 0) = INFINITY;
  CHECK_THROWS_AS(soft_labels(bad), InputError);
}

TEST_CASE("soft rows sum to one") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, 20.0);
  Matrix z(50, 4);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = g(rng);
  const Matrix s = soft_labels(z);
  for (Eigen::Index i = 0; i < s.rows(); ++i) CHECK(std::abs(s.row(i).sum() - 1.0) <= 1e-9);
}

TEST_CASE("argmax ties go to the lowest class") {
  Matrix z(2, 3);
  z << 0.1, 0.7, 0.2, 0.5, 0.5, 0.1;
  CHECK(argmax_rows(z) == std::vector<ClassId>{1, 0});
}

TEST_CASE("forward matches a dense reference") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = random_graph(seed, 10, 0.3, 3, 4);
    const ModelParams p = init_params(4, 5, 3, seed);
    for (int k = 1; k <= 2; ++k) {
      const AdjacencyView view = k_hop_adjacency(g, k);
      Eigen::MatrixXi adj = Eigen::MatrixXi::Zero(10, 10);
      for (NodeId v = 0; v < 10; ++v) {
        for (NodeId u : view.neighbors(v)) adj(v, u) = 1;
      }
      const ForwardOutput out = forward(p, view, g.features());
      CHECK((out.logits - dense_logits(p, adj, g.features())).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("forward on a 4-node path differs between 1-hop and 2-hop views") {
  Matrix x(4, 2);
  x << 1, 0, 0, 1, 1, 1, -1, 2;
  const Graph g = Graph::build(std::vector<Edge>{{0, 1}, {1, 2}, {2, 3}}, x);
  const ModelParams p = init_params(2, 4, 2, 3);
  const Matrix z1 = forward(p, k_hop_adjacency(g, 1), x).logits;
  const Matrix z2 = forward(p, k_hop_adjacency(g, 2), x).logits;
  // The hand-built A^2 of the path: 0-2 and 1-3.
  Eigen::MatrixXi a2 = Eigen::MatrixXi::Zero(4, 4);
  a2(0, 2) = a2(2, 0) = a2(1, 3) = a2(3, 1) = 1;
  CHECK((z2 - dense_logits(p, a2, x)).cwiseAbs().maxCoeff() < 1e-12);
  for (Eigen::Index i = 0; i < 4; ++i) CHECK((z1.row(i) - z2.row(i)).norm() > 1e-9);
}

TEST_CASE("edgeless graph reduces to a per-row perceptron") {
  const Graph g = make_graph(5, {}, {}, 3);
  Matrix x(5, 3);
  x.setRandom();
  const ModelParams p = init_params(3, 4, 2, 9);
  const Matrix z = forward(p, k_hop_adjacency(g, 1), x).logits;
  for (Eigen::Index i = 0; i < 5; ++i) {
    const Eigen::RowVectorXd h1 = (x.row(i) * p.w1 + p.b1).cwiseMax(0.0);
    const Eigen::RowVectorXd out = ((h1 * p.w2 + p.b2) * p.main_w) + p.main_b;
    CHECK((z.row(i) - out).norm() < 1e-12);
  }
}

TEST_CASE("forward is permutation equivariant") {
  const Graph g = random_graph(12, 12, 0.25, 3, 3);
  std::vector<NodeId> perm(12);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<Edge> edges;
  for (const Edge& e : g.edges()) edges.push_back({perm[static_cast<std::size_t>(e.src)], perm[static_cast<std::size_t>(e.dst)]});
  Matrix x(12, 3);
  for (NodeId v = 0; v < 12; ++v) x.row(perm[static_cast<std::size_t>(v)]) = g.features().row(v);
  const Graph h = Graph::build(edges, x);
  const ModelParams p = init_params(3, 5, 3, 1);
  const Matrix zg = forward(p, k_hop_adjacency(g, 1), g.features()).logits;
  const Matrix zh = forward(p, k_hop_adjacency(h, 1), x).logits;
  for (NodeId v = 0; v < 12; ++v) {
    CHECK((zg.row(v) - zh.row(perm[static_cast<std::size_t>(v)])).norm() < 1e-12);
  }
}

TEST_CASE("pseudo head never affects predictions") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> noise(0.0, 10.0);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = random_graph(seed, 20, 0.2, 3, 4);
    const AdjacencyView adj = k_hop_adjacency(g, 1);
    ModelParams p = init_params(4, 6, 3, seed);
    const auto before = predict(p, adj, g.features());
    for (Eigen::Index i = 0; i < p.pseudo_w.size(); ++i) p.pseudo_w.data()[i] = noise(rng);
    for (Eigen::Index i = 0; i < p.pseudo_b.size(); ++i) p.pseudo_b.data()[i] = noise(rng);
    CHECK(predict(p, adj, g.features()) == before);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Graph g = random_graph(seed + 40, 8, 0.35, 3, 3);
    const AdjacencyView adj = k_hop_adjacency(g, 1);
    ModelParams p = init_params(3, 4, 3, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.3);
    p.b1 = p.b1.unaryExpr([&](double) { return noise(rng); });
    p.main_b = p.main_b.unaryExpr([&](double) { return noise(rng); });
    const LabeledNodes main = nodes_with_labels(g, {0, 1, 2, 3});
    const LabeledNodes leftover = nodes_with_labels(g, {5, 6});
    for (double lambda : {0.0, 0.09, 1.0}) {
      CHECK(gradient_check(p, adj, g.features(), main, leftover, lambda, 5e-4) <= 1e-4);
    }
  }
}

TEST_CASE("gradients stay finite for zero weights") {
  const Graph g = random_graph(1, 6, 0.4, 2, 2);
  ModelParams p = init_params(2, 3, 2, 0);
  p.for_each_block([](auto& m) { m.setZero(); });
  const LabeledNodes main = nodes_with_labels(g, {0, 1});
  const LossGradient lg = dual_loss_gradient(p, k_hop_adjacency(g, 1), g.features(), main, {}, 0.09, 5e-4);
  CHECK(std::isfinite(lg.loss.total));
  CHECK(lg.grad.all_finite());
}

TEST_CASE("training loss decreases on a two-blob graph") {
  const Graph g = two_blobs(3, 20);
  const AdjacencyView adj = k_hop_adjacency(g, 1);
  const LabeledNodes labeled = nodes_with_labels(g, {0, 1, 2, 3});
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.learning_rate = 1e-3;
  const TrainResult r = train_supervised(init_params(2, 8, 2, 1), adj, g.features(), labeled, {}, cfg);
  REQUIRE(r.loss_history.size() == 10);
  for (std::size_t i = 1; i < r.loss_history.size(); ++i) CHECK(r.loss_history[i] < r.loss_history[i - 1]);
}

TEST_CASE("dual training without a pseudo term equals supervised training") {
  const Graph g = two_blobs(5, 24);
  const AdjacencyView adj = k_hop_adjacency(g, 1);
  const LabeledNodes labeled = nodes_with_labels(g, {0, 1, 2, 3, 4, 5});
  const LabeledNodes validation = nodes_with_labels(g, {10, 11, 12, 13});
  TrainConfig cfg;
  cfg.epochs = 40;
  cfg.lambda_dual = 0.0;
  const ModelParams init = init_params(2, 8, 2, 7);
  const TrainResult a = train_dual(init, adj, g.features(), labeled, {}, {}, validation, cfg);
  const TrainResult b = train_supervised(init, adj, g.features(), labeled, validation, cfg);
  CHECK(same_params(a.params, b.params));
  CHECK(a.params.pseudo_w == init.pseudo_w);
  CHECK(a.params.pseudo_b == init.pseudo_b);

  // A zero-weight leftover set moves nothing either.
  const LabeledNodes leftover = nodes_with_labels(g, {20, 21});
  const TrainResult c = train_dual(init, adj, g.features(), labeled, {}, leftover, validation, cfg);
  CHECK(same_params(c.params, b.params));
}

TEST_CASE("dual loss with an empty leftover set is the main term") {
  const Graph g = two_blobs(2, 12);
  const AdjacencyView adj = k_hop_adjacency(g, 1);
  const ModelParams p = init_params(2, 4, 2, 3);
  const LabeledNodes main = nodes_with_labels(g, {0, 1, 2});
  const LossBreakdown l = dual_loss(p, adj, g.features(), main, {}, 0.5, 0.0);
  CHECK(l.pseudo == 0.0);
  CHECK(l.total == l.main);
}

TEST_CASE("training rejects an empty clean set and bad labels") {
  const Graph g = two_blobs(2, 12);
  const AdjacencyView adj = k_hop_adjacency(g, 1);
  const ModelParams p = init_params(2, 4, 2, 3);
  CHECK_THROWS_AS(train_dual(p, adj, g.features(), {}, {}, {}, {}, {}), InputError);
  LabeledNodes bad;
  bad.add(0, 5);
  CHECK_THROWS_AS(train_dual(p, adj, g.features(), bad, {}, {}, {}, {}), InputError);
}

TEST_CASE("training reports divergence") {
  const Graph g = two_blobs(2, 12);
  const AdjacencyView adj = k_hop_adjacency(g, 1);
  const Matrix x = Matrix::Constant(g.num_nodes(), 2, std::numeric_limits<double>::max());
  const LabeledNodes labeled = nodes_with_labels(g, {0, 1, 2});
  TrainConfig cfg;
  cfg.epochs = 5;
  CHECK_THROWS_AS(train_supervised(init_params(2, 4, 2, 3), adj, x, labeled, {}, cfg), RuntimeFailure);
}

TEST_CASE("checkpoint round trip and format") {
  const auto path = std::filesystem::temp_directory_path() / "hcgst_ckpt.bin";
  const ModelParams p = init_params(3, 5, 4, 42);
  save_checkpoint(p, path);
  const ModelParams q = load_checkpoint(path);
  CHECK(same_params(p, q));
  CHECK(q.seed == 42);

  const auto expected_size = 8 + 4 + 4 * 8 +
                             8 * static_cast<std::uintmax_t>(3 * 5 + 5 + 5 * 5 + 5 + 5 * 4 + 4 + 5 * 4 + 4);
  CHECK(std::filesystem::file_size(path) == expected_size);
  {
    std::ifstream in(path, std::ios::binary);
    char magic[8];
    in.read(magic, 8);
    CHECK(std::string(magic, 8) == "HCGSTPRM");
  }
  {
    std::fstream f(path, std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(0);
    f.write("XXXXXXXX", 8);
  }
  CHECK_THROWS_AS(load_checkpoint(path), InputError);
  std::filesystem::remove(path);
}

TEST_CASE("accuracy") {
  LabeledNodes t;
  t.add(0, 1);
  t.add(2, 0);
  const std::vector<ClassId> pred = {1, 1, 1};
  CHECK(accuracy(pred, t) == 0.5);
  CHECK(accuracy(pred, {}) == 0.0);
}
