#include "advgraph/graph.hpp"

#include "advgraph/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace advgraph {

Graph::Graph(std::string name, AdjacencyMatrix adjacency,
             std::shared_ptr<const SparseMatrix> features)
    : name_(std::move(name)), adjacency_(std::move(adjacency)), features_(std::move(features)) {
  const Index n = adjacency_.rows();
  if (adjacency_.cols() != n) throw InvalidGraph("adjacency must be square");
  if (n < 1) throw InvalidGraph("graph needs at least one node");
  if (features_ && features_->rows() != n)
    throw InvalidGraph("feature matrix has " + std::to_string(features_->rows()) +
                       " rows for " + std::to_string(n) + " nodes");
  Index twice_edges = 0;
  for (Index j = 0; j < n; ++j) {
    if (adjacency_(j, j) != 0) throw InvalidGraph("self-loop at node " + std::to_string(j));
    for (Index i = 0; i < n; ++i) {
      const auto v = adjacency_(i, j);
      if (v > 1) throw InvalidGraph("adjacency entries must be 0 or 1");
      if (v != adjacency_(j, i)) throw InvalidGraph("adjacency must be symmetric");
      twice_edges += v;
    }
  }
  num_edges_ = twice_edges / 2;
}

Graph Graph::from_edges(std::string name, Index num_nodes, const EdgeList& edges,
                        std::shared_ptr<const SparseMatrix> features) {
  AdjacencyMatrix a = AdjacencyMatrix::Zero(num_nodes, num_nodes);
  for (const auto& [u, v] : edges) {
    if (u < 0 || v < 0 || u >= num_nodes || v >= num_nodes)
      throw InvalidGraph("edge endpoint out of range");
    if (u == v) throw SelfLoop("self-loop at node " + std::to_string(u));
    a(u, v) = 1;
    a(v, u) = 1;
  }
  return Graph(std::move(name), std::move(a), std::move(features));
}

Index Graph::degree(Index i) const { return adjacency_.col(i).cast<Index>().sum(); }

std::vector<Index> Graph::neighbors(Index i) const {
  std::vector<Index> out;
  const auto col = adjacency_.col(i);
  for (Index j = 0; j < col.size(); ++j)
    if (col(j)) out.push_back(j);
  return out;
}

std::vector<std::vector<Index>> Graph::adjacency_lists() const {
  std::vector<std::vector<Index>> lists(static_cast<std::size_t>(num_nodes()));
  for (Index i = 0; i < num_nodes(); ++i) lists[static_cast<std::size_t>(i)] = neighbors(i);
  return lists;
}

EdgeList Graph::edge_list() const {
  EdgeList out;
  out.reserve(static_cast<std::size_t>(num_edges_));
  for (Index i = 0; i < num_nodes(); ++i)
    for (Index j = i + 1; j < num_nodes(); ++j)
      if (adjacency_(j, i)) out.emplace_back(i, j);
  return out;
}

Index Graph::feature_dim() const { return features_ ? features_->cols() : num_nodes(); }

SparseMatrix Graph::feature_matrix() const {
  if (features_) return *features_;
  SparseMatrix eye(num_nodes(), num_nodes());
  eye.setIdentity();
  return eye;
}

Graph Graph::with_name(std::string name) const {
  Graph copy = *this;
  copy.name_ = std::move(name);
  return copy;
}

void NodeSplit::validate(Index n) const {
  if (num_nodes() != n)
    throw InvalidGraph("label vector has " + std::to_string(labels.size()) + " entries for " +
                       std::to_string(n) + " nodes");
  if (num_classes < 1) throw InvalidGraph("num_classes must be positive");
  std::vector<bool> seen_class(static_cast<std::size_t>(num_classes), false);
  for (int y : labels) {
    if (y < 0 || y >= num_classes) throw InvalidGraph("label out of range");
    seen_class[static_cast<std::size_t>(y)] = true;
  }
  if (std::find(seen_class.begin(), seen_class.end(), false) != seen_class.end())
    throw InvalidGraph("some class never appears in labels");
  std::vector<int> owner(static_cast<std::size_t>(n), -1);
  const std::vector<Index>* sets[] = {&train, &val, &test};
  for (int s = 0; s < 3; ++s) {
    for (Index v : *sets[s]) {
      if (v < 0 || v >= n) throw InvalidGraph("split index out of range");
      auto& o = owner[static_cast<std::size_t>(v)];
      if (o != -1) throw InvalidGraph("node " + std::to_string(v) + " appears in two split sets");
      o = s;
    }
  }
}

Matrix NodeSplit::one_hot() const {
  Matrix y = Matrix::Zero(num_nodes(), num_classes);
  for (Index i = 0; i < num_nodes(); ++i) y(i, labels[static_cast<std::size_t>(i)]) = 1.0;
  return y;
}

Matrix normalize_adjacency(const Graph& g) {
  return normalize_adjacency(g.adjacency().cast<double>());
}

SparseMatrix normalized_adjacency_sparse(Index num_nodes, const EdgeList& edges) {
  std::vector<double> deg(static_cast<std::size_t>(num_nodes), 1.0);
  for (const auto& [u, v] : edges) {
    deg[static_cast<std::size_t>(u)] += 1.0;
    deg[static_cast<std::size_t>(v)] += 1.0;
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size() * 2 + static_cast<std::size_t>(num_nodes));
  for (Index i = 0; i < num_nodes; ++i) trips.emplace_back(i, i, 1.0 / deg[static_cast<std::size_t>(i)]);
  for (const auto& [u, v] : edges) {
    const double w = 1.0 / std::sqrt(deg[static_cast<std::size_t>(u)] * deg[static_cast<std::size_t>(v)]);
    trips.emplace_back(u, v, w);
    trips.emplace_back(v, u, w);
  }
  SparseMatrix out(num_nodes, num_nodes);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

SparseMatrix normalized_adjacency_sparse(const Graph& g) {
  return normalized_adjacency_sparse(g.num_nodes(), g.edge_list());
}

Graph Graph::with_flips(std::span<const Flip> flips) const {
  const Index n = num_nodes();
  AdjacencyMatrix a = adjacency_;
  Index edges = num_edges_;
  for (const auto& f : flips) {
    if (f.i < 0 || f.j < 0 || f.i >= n || f.j >= n) throw InfeasibleFlip("flip endpoint out of range");
    if (f.i == f.j) throw SelfLoop("cannot flip a self-loop at node " + std::to_string(f.i));
    if (f.theta != 1 && f.theta != -1) throw InfeasibleFlip("theta must be +1 or -1");
    const int next = static_cast<int>(a(f.i, f.j)) + f.theta;
    if (next != 0 && next != 1)
      throw InfeasibleFlip("flip (" + std::to_string(f.i) + ", " + std::to_string(f.j) + ", " +
                           std::to_string(f.theta) + ") leaves the binary domain");
    a(f.i, f.j) = static_cast<std::uint8_t>(next);
    a(f.j, f.i) = static_cast<std::uint8_t>(next);
    edges += f.theta;
  }
  return Graph(Trusted{}, name_, std::move(a), features_, edges);
}

Graph flip_edge(const Graph& g, Index i, Index j, int theta) {
  const Flip f{i, j, theta};
  return g.with_flips(std::span<const Flip>(&f, 1));
}

Graph flip_edge(const Graph& g, const Flip& f) { return flip_edge(g, f.i, f.j, f.theta); }

Graph apply_flips(const Graph& g, std::span<const Flip> flips) { return g.with_flips(flips); }

std::vector<Flip> candidate_flips(const Graph& g, Index target) {
  std::vector<Flip> out;
  out.reserve(static_cast<std::size_t>(g.num_nodes() - 1));
  for (Index j = 0; j < g.num_nodes(); ++j) {
    if (j == target) continue;
    out.push_back({std::min(target, j), std::max(target, j), g.has_edge(target, j) ? -1 : 1});
  }
  return out;
}

}  // namespace advgraph
