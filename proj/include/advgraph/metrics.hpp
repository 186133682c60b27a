#pragma once

#include "advgraph/gcn.hpp"
#include "advgraph/graph.hpp"

#include <algorithm>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace advgraph {

/// CD = max_{c != R} Y[c] - Y[R]. Positive means the row is misclassified.
template <typename Derived>
typename Derived::Scalar classification_margin(const Eigen::MatrixBase<Derived>& row,
                                               int true_label) {
  using Scalar = typename Derived::Scalar;
  Scalar best_other = -std::numeric_limits<Scalar>::infinity();
  for (Index c = 0; c < row.size(); ++c)
    if (c != true_label) best_other = std::max(best_other, row(c));
  if (row.size() == 1) best_other = Scalar(0);
  return best_other - row(true_label);
}

/// Per-target evaluation record. cd values are classification margins before
/// and after the attack.
struct NodeRecord {
  Index node = 0;
  int label = 0;
  bool correct_before = true;
  bool success = false;
  double cd_before = 0.0;
  double cd_after = 0.0;
  std::vector<Flip> flips;

  bool operator==(const NodeRecord&) const = default;
};

/// Mean of (cd_after - cd_before) over records with correct_before.
/// Throws EmptySet if there are none.
double acd(std::span<const NodeRecord> records);
/// Fraction of correct_before records whose attack succeeded. Throws EmptySet.
double asr(std::span<const NodeRecord> records);
/// (asr_undefended - asr_defended) / asr_undefended; throws UndefinedBaseline
/// when the undefended attack never succeeds.
double adr(double asr_undefended, double asr_defended);

/// Fraction of `subset` predicted correctly at T = 1. Throws EmptySet.
double accuracy(const ModelParams& p, const Graph& g, const NodeSplit& split,
                std::span<const Index> subset);
double accuracy(const std::vector<int>& predicted, const NodeSplit& split,
                std::span<const Index> subset);

/// Records restricted to one true label.
std::vector<NodeRecord> slice_by_label(std::span<const NodeRecord> records, int label);

}  // namespace advgraph
