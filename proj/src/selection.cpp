// SPDX-License-Identifier: Apache-2.0
#include "hcgst/selection.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "hcgst/error.hpp"
#include "hcgst/text_io.hpp"

namespace hcgst {

void SelectionProblem::validate() const {
  const auto m = candidates.size();
  if (m == 0) throw InputError("selection needs at least one candidate");
  if (k < 1) throw InputError("K must be >= 1");
  if (n_bins < 1) throw InputError("bin count must be >= 1");
  if (lambda_s < 0.0) throw InputError("lambda_s must be >= 0");
  if (static_cast<std::size_t>(cand_repr.rows()) != m || cand_homophily.size() != m) {
    throw InputError("candidate representations and homophily must be co-indexed with candidates");
  }
  if (target.n_bins() != n_bins) throw InputError("target distribution has the wrong bin count");
  for (double h : cand_homophily) {
    if (!(h >= 0.0 && h <= 1.0)) throw InputError("candidate homophily outside [0, 1]");
  }
}

std::vector<NodeId> candidate_set(const SoftLabelMatrix& soft, std::span<const NodeId> prior_pseudo,
                                  std::span<const NodeId> labeled,
                                  std::span<const NodeId> validation, double delta_c) {
  if (!(delta_c > 0.0 && delta_c < 1.0)) throw InputError("delta_c must lie in (0, 1)");
  const auto n = static_cast<std::size_t>(soft.rows());
  std::vector<char> excluded(n, 0);
  for (auto set : {prior_pseudo, labeled, validation}) {
    for (NodeId v : set) {
      if (v >= 0 && static_cast<std::size_t>(v) < n) excluded[static_cast<std::size_t>(v)] = 1;
    }
  }
  std::vector<NodeId> out;
  for (std::size_t v = 0; v < n; ++v) {
    if (excluded[v]) continue;
    if (soft.row(static_cast<Eigen::Index>(v)).maxCoeff() > delta_c) {
      out.push_back(static_cast<NodeId>(v));
    }
  }
  return out;
}

HomophilyDistribution selection_bin_mass(std::span<const double> q,
                                         std::span<const double> cand_homophily, int n_bins) {
  if (q.size() != cand_homophily.size()) throw InputError("q and homophily lengths differ");
  HomophilyDistribution mass(n_bins);
  for (std::size_t j = 0; j < q.size(); ++j) {
    mass.counts[static_cast<std::size_t>(bin_index(cand_homophily[j], n_bins))] += q[j];
  }
  return mass;
}

namespace {

void check_q(const SelectionProblem& problem, std::span<const double> q) {
  if (q.size() != problem.candidates.size()) throw InputError("q length differs from |C|");
}

}  // namespace

SelectionLoss selection_loss(const SelectionProblem& problem, std::span<const double> q) {
  return selection_loss_gradient(problem, q).loss;
}

SelectionLossGradient selection_loss_gradient(const SelectionProblem& problem,
                                              std::span<const double> q) {
  check_q(problem, q);
  SelectionLossGradient out;
  const std::size_t m = q.size();

  const CmdGradient cg = cmd_weighted_with_gradient(problem.cand_repr, q, problem.global_repr,
                                                    problem.cmd);
  out.loss.cmd = cg.value;

  const HomophilyDistribution mass = selection_bin_mass(q, problem.cand_homophily, problem.n_bins);
  const KlGradient kg = kl_divergence_with_gradient(mass.counts, problem.target.counts,
                                                    problem.kl_eps);
  out.loss.kl = kg.value;

  const double l1 = std::accumulate(q.begin(), q.end(), 0.0);
  const double excess = l1 - static_cast<double>(problem.k);
  out.loss.penalty = std::max(0.0, excess);
  out.loss.total = out.loss.cmd + problem.lambda_s * out.loss.kl + out.loss.penalty;

  out.grad.resize(m);
  for (std::size_t j = 0; j < m; ++j) {
    const auto bin = static_cast<std::size_t>(bin_index(problem.cand_homophily[j], problem.n_bins));
    out.grad[j] = cg.grad(static_cast<Eigen::Index>(j)) + problem.lambda_s * kg.grad[bin] +
                  (excess > 0.0 ? 1.0 : 0.0);
  }
  return out;
}

SelectionVector initial_selection(const SelectionProblem& problem) {
  const double m = static_cast<double>(problem.candidates.size());
  const double q0 = std::min(static_cast<double>(problem.k) / m, 1.0);
  return {std::vector<double>(problem.candidates.size(), q0)};
}

SelectionResult optimize_selection(const SelectionProblem& problem,
                                   const SelectionOptions& options) {
  problem.validate();
  if (options.iterations < 0) throw InputError("iteration count must be >= 0");
  if (!(options.step > 0.0)) throw InputError("step must be > 0");

  SelectionResult result;
  std::vector<double> q = initial_selection(problem).q;

  auto check_finite = [](const SelectionLoss& loss, int iteration) {
    const char* term = nullptr;
    if (!std::isfinite(loss.cmd)) term = "CMD";
    else if (!std::isfinite(loss.kl)) term = "KL";
    else if (!std::isfinite(loss.penalty)) term = "cardinality penalty";
    if (term) {
      throw RuntimeFailure(std::string("selection loss diverged in the ") + term +
                           " term at iteration " + std::to_string(iteration));
    }
  };

  for (int it = 0; it <= options.iterations; ++it) {
    const SelectionLossGradient lg = selection_loss_gradient(problem, q);
    check_finite(lg.loss, it);
    if (it == 0) {
      result.initial_loss = lg.loss;
      result.best_loss = lg.loss;
      result.best.q = q;
    } else if (lg.loss.total < result.best_loss.total) {
      result.best_loss = lg.loss;
      result.best.q = q;
      result.best_iteration = it;
    }
    if (options.trace) {
      result.trace.push_back({it, lg.loss, std::accumulate(q.begin(), q.end(), 0.0)});
    }
    if (it == options.iterations) break;

    std::vector<double> next(q.size());
    double total = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j) {
      next[j] = std::clamp(q[j] - options.step * lg.grad[j], 0.0, 1.0);
      total += next[j];
    }
    // The weighted CMD is undefined at q = 0; stop at the boundary.
    if (!(total > 0.0)) break;
    q = std::move(next);
  }
  return result;
}

std::vector<NodeId> top_k(std::span<const double> q, int k, std::span<const NodeId> candidates,
                          std::span<const double> confidence) {
  if (k < 1) throw InputError("K must be >= 1");
  if (q.size() != candidates.size() || confidence.size() != candidates.size()) {
    throw InputError("top_k inputs must be co-indexed");
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (q[a] != q[b]) return q[a] > q[b];
    if (confidence[a] != confidence[b]) return confidence[a] > confidence[b];
    return candidates[a] < candidates[b];
  });
  const std::size_t take = std::min(order.size(), static_cast<std::size_t>(k));
  std::vector<NodeId> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(candidates[order[i]]);
  return out;
}

void write_selection_trace_csv(std::ostream& out, std::span<const SelectionTraceRow> rows) {
  out << "iteration,loss,cmd,kl,penalty,q_l1\n";
  for (const auto& r : rows) {
    out << r.iteration << ',' << format_double(r.loss.total) << ',' << format_double(r.loss.cmd)
        << ',' << format_double(r.loss.kl) << ',' << format_double(r.loss.penalty) << ','
        << format_double(r.q_l1) << '\n';
  }
}

}  // namespace hcgst
