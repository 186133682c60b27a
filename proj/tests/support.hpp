// Generators and independent reference computations shared by the test binaries.
#pragma once

#include "advgraph/dataset.hpp"
#include "advgraph/gcn.hpp"
#include "advgraph/graph.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using namespace advgraph;

inline Graph random_graph(std::mt19937_64& rng, Index n, double p, bool with_features = false,
                          Index feature_dim = 6) {
  std::bernoulli_distribution edge(p);
  EdgeList edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (edge(rng)) edges.emplace_back(i, j);
  std::shared_ptr<const SparseMatrix> x;
  if (with_features) {
    std::uniform_real_distribution<double> val(0.0, 1.0);
    std::bernoulli_distribution nz(0.5);
    std::vector<Eigen::Triplet<double>> t;
    for (Index i = 0; i < n; ++i)
      for (Index c = 0; c < feature_dim; ++c)
        if (nz(rng)) t.emplace_back(i, c, val(rng));
    auto m = std::make_shared<SparseMatrix>(n, feature_dim);
    m->setFromTriplets(t.begin(), t.end());
    x = m;
  }
  return Graph::from_edges("random", n, edges, x);
}

/// Labels cycle through the classes so every class is used; train gets every
/// other node, test the rest.
inline NodeSplit cyclic_split(Index n, int num_classes, std::mt19937_64& rng) {
  NodeSplit s;
  s.num_classes = num_classes;
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % num_classes);
  std::shuffle(labels.begin(), labels.end(), rng);
  s.labels = labels;
  for (Index i = 0; i < n; ++i) (i % 2 == 0 ? s.train : s.test).push_back(i);
  return s;
}

inline ModelParams random_params(std::mt19937_64& rng, Index in, Index hidden, Index classes,
                                 double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  ModelParams p;
  p.w0 = Matrix::NullaryExpr(in, hidden, [&] { return d(rng); });
  p.w1 = Matrix::NullaryExpr(hidden, classes, [&] { return d(rng); });
  return p;
}

/// Planted-partition graph with a class per block and features that carry a
/// noisy copy of the class.
struct Planted {
  Graph graph;
  NodeSplit split;
};

inline Planted planted_partition(std::mt19937_64& rng, Index n, int classes, double p_in, double p_out,
                                 double feature_noise = 0.3) {
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % classes);
  std::shuffle(labels.begin(), labels.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  EdgeList edges;
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j)
      if (u(rng) < (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(j)] ? p_in : p_out))
        edges.emplace_back(i, j);
  const Index dim = 2 * classes;
  std::vector<Eigen::Triplet<double>> t;
  for (Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    t.emplace_back(i, y, 1.0);
    for (Index c = 0; c < dim; ++c)
      if (c != y && u(rng) < feature_noise) t.emplace_back(i, c, 1.0);
  }
  auto x = std::make_shared<SparseMatrix>(n, dim);
  x->setFromTriplets(t.begin(), t.end());
  Planted out{Graph::from_edges("planted", n, edges, x), {}};
  out.split.labels = labels;
  out.split.num_classes = classes;
  for (Index i = 0; i < n; ++i) (i % 3 == 0 ? out.split.train : out.split.test).push_back(i);
  return out;
}

// ---- dense reference model (written independently of the library) ----
// Templated on the scalar so finite differences can run in extended precision.

template <typename S>
MatrixX<S> ref_normalize(const MatrixX<S>& a) {
  const Index n = a.rows();
  MatrixX<S> t = a;
  for (Index i = 0; i < n; ++i) t(i, i) += S(1);
  std::vector<S> d(static_cast<std::size_t>(n), S(0));
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) d[static_cast<std::size_t>(i)] += t(i, j);
  MatrixX<S> out(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j)
      out(i, j) = t(i, j) / std::sqrt(d[static_cast<std::size_t>(i)] * d[static_cast<std::size_t>(j)]);
  return out;
}

template <typename S>
MatrixX<S> ref_logits(const MatrixX<S>& w0, const MatrixX<S>& w1, const MatrixX<S>& a, const MatrixX<S>& x) {
  const MatrixX<S> an = ref_normalize(a);
  MatrixX<S> h = an * x * w0;
  for (Index i = 0; i < h.size(); ++i) h.data()[i] = std::max(S(0), h.data()[i]);
  return an * h * w1;
}

template <typename S>
std::vector<S> ref_log_softmax(const MatrixX<S>& z, Index row, S t) {
  S mx = -std::numeric_limits<S>::infinity();
  for (Index k = 0; k < z.cols(); ++k) mx = std::max(mx, z(row, k) / t);
  S sum = 0;
  for (Index k = 0; k < z.cols(); ++k) sum += std::exp(z(row, k) / t - mx);
  std::vector<S> out(static_cast<std::size_t>(z.cols()));
  for (Index k = 0; k < z.cols(); ++k) out[static_cast<std::size_t>(k)] = z(row, k) / t - mx - std::log(sum);
  return out;
}

/// Sum over nodes of -sum_k target_k log softmax(z/T)_k for one loss mode.
template <typename S>
S ref_loss(const MatrixX<S>& z, const NodeSplit& s, const std::vector<Index>& nodes, LossMode mode, S t,
           const Matrix* soft, LossMode hard_mode) {
  const int f = s.num_classes;
  auto hard = [&](LossMode m, S temp) {
    S total = 0;
    for (Index v : nodes) {
      const auto lp = ref_log_softmax(z, v, temp);
      for (int k = 0; k < f; ++k) {
        S w = k == s.labels[static_cast<std::size_t>(v)] ? S(1) : S(0);
        if (m == LossMode::scel && w == S(0)) w = S(1) / S(f);
        total -= w * lp[static_cast<std::size_t>(k)];
      }
    }
    return total;
  };
  if (mode != LossMode::combined) return hard(mode, t);
  S ls = 0;
  for (Index v : nodes) {
    const auto lp = ref_log_softmax(z, v, t);
    for (int k = 0; k < f; ++k) ls -= S((*soft)(v, k)) * lp[static_cast<std::size_t>(k)];
  }
  return ls / (t * t + S(1)) + t * t * hard(hard_mode, S(1)) / (t * t + S(1));
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// ---- scratch directories ----

inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("advgraph_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

/// Writes a dataset directory for a planted-partition graph and returns its manifest path.
inline std::filesystem::path write_planted_dataset(const std::filesystem::path& dir, std::uint64_t seed,
                                                   Index n = 60, int classes = 3) {
  std::mt19937_64 rng(seed);
  Planted pl = planted_partition(rng, n, classes, 0.25, 0.02);
  Dataset ds;
  ds.graph = pl.graph.with_name("toy");
  ds.split = stratified_split(pl.split.labels, classes, {static_cast<std::size_t>(n / 6),
                                                         static_cast<std::size_t>(n / 6),
                                                         static_cast<std::size_t>(n - 2 * (n / 6))},
                              seed);
  for (Index i = 0; i < n; ++i) ds.node_ids.push_back("n" + std::to_string(i));
  for (int c = 0; c < classes; ++c) ds.class_names.push_back("class" + std::to_string(c));
  save_dataset(dir, ds);
  return dir / "manifest.json";
}

}  // namespace testsupport
