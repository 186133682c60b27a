#pragma once

#include "advgraph/gcn.hpp"
#include "advgraph/graph.hpp"

#include <span>
#include <vector>

namespace advgraph {

/// Cached forward pass of a trained GCN on one graph that answers per-target
/// questions without touching the rest of the graph: the target's logits, its
/// logits after link flips incident to it, and the cross-entropy gradient
/// with respect to the target's adjacency row.
///
/// A flip (t, j) only changes the degrees of t and j, so the two-hop receptive
/// field of t is all that has to be recomputed. Results are exact (equal to a
/// full forward pass on the perturbed graph up to rounding).
///
/// Holds references to `params` and `graph`; both must outlive this object.
class LocalForward {
 public:
  LocalForward(const ModelParams& params, const Graph& graph);

  const Graph& graph() const { return *graph_; }
  const ModelParams& params() const { return *params_; }
  Index degree(Index i) const { return static_cast<Index>(neighbors_[static_cast<std::size_t>(i)].size()); }
  const std::vector<Index>& neighbors(Index i) const { return neighbors_[static_cast<std::size_t>(i)]; }

  RowVector logits(Index target) const;
  /// Logits of `target` after applying `flips`; every flip must touch target.
  RowVector logits_after(Index target, std::span<const Flip> flips) const;

  /// Row `target` of grad_adjacency for the target-only cross-entropy at T = 1.
  RowVector incident_gradient(Index target, int label) const;

 private:
  const ModelParams* params_;
  const Graph* graph_;
  std::vector<std::vector<Index>> neighbors_;
  Eigen::VectorXd deg_;  // 1 + degree
  Matrix xw_;            // X W0
  Matrix pre_;           // A_bar X W0
  Matrix message_;       // ReLU(pre) W1
};

}  // namespace advgraph
