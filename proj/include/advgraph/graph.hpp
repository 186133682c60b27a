#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <compare>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace advgraph {

using Index = Eigen::Index;

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowVectorX = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

using Matrix = MatrixX<double>;
using RowVector = RowVectorX<double>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using AdjacencyMatrix = MatrixX<std::uint8_t>;
using EdgeList = std::vector<std::pair<Index, Index>>;

/// A single link edit: theta = +1 adds (i, j), theta = -1 removes it.
struct Flip {
  Index i = 0;
  Index j = 0;
  int theta = 1;

  Index lo() const { return std::min(i, j); }
  Index hi() const { return std::max(i, j); }

  friend bool operator==(const Flip&, const Flip&) = default;
  friend auto operator<=>(const Flip&, const Flip&) = default;
};

/// Undirected simple graph with a dense binary adjacency and optional node
/// features. Instances are immutable; edits return copies, so a base graph can
/// be shared freely between threads.
class Graph {
 public:
  Graph() = default;

  /// Validates symmetry, zero diagonal and binary entries (throws InvalidGraph).
  Graph(std::string name, AdjacencyMatrix adjacency,
        std::shared_ptr<const SparseMatrix> features = nullptr);

  /// Builds from an undirected edge list; duplicate pairs collapse into one.
  static Graph from_edges(std::string name, Index num_nodes, const EdgeList& edges,
                          std::shared_ptr<const SparseMatrix> features = nullptr);

  const std::string& name() const { return name_; }
  Index num_nodes() const { return adjacency_.rows(); }
  Index num_edges() const { return num_edges_; }
  const AdjacencyMatrix& adjacency() const { return adjacency_; }

  bool has_edge(Index i, Index j) const { return adjacency_(i, j) != 0; }
  Index degree(Index i) const;
  std::vector<Index> neighbors(Index i) const;
  std::vector<std::vector<Index>> adjacency_lists() const;
  /// Unordered pairs (i < j) in lexicographic order.
  EdgeList edge_list() const;

  bool has_features() const { return features_ != nullptr; }
  /// Width of the feature matrix the GCN sees: C, or n for identity features.
  Index feature_dim() const;
  /// X when present, otherwise the n x n identity.
  SparseMatrix feature_matrix() const;
  const std::shared_ptr<const SparseMatrix>& shared_features() const { return features_; }

  Graph with_name(std::string name) const;
  /// Copy with the given flips applied (same checks as flip_edge).
  Graph with_flips(std::span<const Flip> flips) const;

  /// Structural equality (adjacency only).
  bool same_structure(const Graph& other) const { return adjacency_ == other.adjacency_; }

 private:
  struct Trusted {};
  Graph(Trusted, std::string name, AdjacencyMatrix adjacency,
        std::shared_ptr<const SparseMatrix> features, Index num_edges)
      : name_(std::move(name)),
        adjacency_(std::move(adjacency)),
        features_(std::move(features)),
        num_edges_(num_edges) {}

  std::string name_;
  AdjacencyMatrix adjacency_;
  std::shared_ptr<const SparseMatrix> features_;
  Index num_edges_ = 0;
};

/// Labels and the disjoint train/val/test index sets of a dataset.
struct NodeSplit {
  std::vector<int> labels;
  int num_classes = 0;
  std::vector<Index> train;
  std::vector<Index> val;
  std::vector<Index> test;

  Index num_nodes() const { return static_cast<Index>(labels.size()); }
  /// Throws InvalidGraph on overlapping sets, out-of-range ids or unused classes.
  void validate(Index n) const;
  /// Ground-truth indicator matrix Y (n x |F|).
  Matrix one_hot() const;
};

/// D^-1/2 (A + I) D^-1/2 where D holds the row sums of A + I. Accepts any real
/// square matrix so it also serves weighted or asymmetric inputs.
template <typename Derived>
MatrixX<typename Derived::Scalar> normalize_adjacency(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Index n = a.rows();
  MatrixX<Scalar> tilde = a + MatrixX<Scalar>::Identity(n, n);
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_sqrt =
      tilde.rowwise().sum().array().rsqrt().matrix();
  return inv_sqrt.asDiagonal() * tilde * inv_sqrt.asDiagonal();
}

/// Dense normalized adjacency of a graph.
Matrix normalize_adjacency(const Graph& g);

/// Same values as normalize_adjacency(g), stored sparse.
SparseMatrix normalized_adjacency_sparse(const Graph& g);
SparseMatrix normalized_adjacency_sparse(Index num_nodes, const EdgeList& edges);

/// Copy of g with (i, j) and (j, i) shifted by theta.
/// Throws SelfLoop when i == j and InfeasibleFlip when the entry would leave {0, 1}.
Graph flip_edge(const Graph& g, Index i, Index j, int theta);
Graph flip_edge(const Graph& g, const Flip& f);
Graph apply_flips(const Graph& g, std::span<const Flip> flips);

/// Every link flip incident to target: one per other node, removing existing
/// links and adding missing ones, ordered by (min, max) endpoint.
std::vector<Flip> candidate_flips(const Graph& g, Index target);

}  // namespace advgraph
