#include "advgraph/local_forward.hpp"

#include "advgraph/errors.hpp"

#include <algorithm>
#include <cmath>

namespace advgraph {

LocalForward::LocalForward(const ModelParams& params, const Graph& graph)
    : params_(&params), graph_(&graph), neighbors_(graph.adjacency_lists()) {
  const Index n = graph.num_nodes();
  if (params.input_dim() != graph.feature_dim())
    throw ShapeMismatch("W0 rows do not match the graph's feature width");
  deg_.resize(n);
  for (Index i = 0; i < n; ++i)
    deg_(i) = 1.0 + static_cast<double>(neighbors_[static_cast<std::size_t>(i)].size());
  const SparseMatrix a = normalized_adjacency_sparse(graph);
  xw_ = graph.feature_matrix() * params.w0;
  pre_ = a * xw_;
  message_ = pre_.cwiseMax(0.0) * params.w1;
}

RowVector LocalForward::logits(Index t) const {
  RowVector z = message_.row(t) / deg_(t);
  for (Index k : neighbors_[static_cast<std::size_t>(t)])
    z += message_.row(k) / std::sqrt(deg_(t) * deg_(k));
  return z;
}

namespace {

struct Touched {
  Index node;
  int theta;  // change of the (target, node) entry
};

}  // namespace

RowVector LocalForward::logits_after(Index t, std::span<const Flip> flips) const {
  if (flips.empty()) return logits(t);
  std::vector<Touched> touched;
  touched.reserve(flips.size());
  int target_shift = 0;
  for (const auto& f : flips) {
    if (f.i != t && f.j != t) throw InfeasibleFlip("flip is not incident to the target");
    const Index other = f.i == t ? f.j : f.i;
    const int next = static_cast<int>(graph_->adjacency()(t, other)) + f.theta;
    if (other == t || (next != 0 && next != 1)) throw InfeasibleFlip("infeasible flip");
    touched.push_back({other, f.theta});
    target_shift += f.theta;
  }
  auto shift_of = [&](Index m) -> int {
    if (m == t) return target_shift;
    for (const auto& e : touched)
      if (e.node == m) return e.theta;
    return 0;
  };
  auto new_deg = [&](Index m) { return deg_(m) + shift_of(m); };
  auto new_neighbors = [&](Index k) {
    std::vector<Index> out = neighbors_[static_cast<std::size_t>(k)];
    for (const auto& e : touched) {
      Index other = -1;
      if (k == t) other = e.node;
      else if (k == e.node) other = t;
      else continue;
      if (e.theta > 0) out.push_back(other);
      else out.erase(std::find(out.begin(), out.end(), other));
    }
    return out;
  };
  auto is_changed = [&](Index m) { return m == t || shift_of(m) != 0; };

  // Updated first-layer pre-activation of node k.
  auto new_pre = [&](Index k) -> RowVector {
    const double dk = new_deg(k);
    if (is_changed(k)) {
      RowVector acc = xw_.row(k) / dk;
      for (Index m : new_neighbors(k)) acc += xw_.row(m) / std::sqrt(dk * new_deg(m));
      return acc;
    }
    RowVector acc = pre_.row(k);
    auto adjust = [&](Index m) {
      if (graph_->has_edge(k, m))
        acc += xw_.row(m) * (1.0 / std::sqrt(dk * new_deg(m)) - 1.0 / std::sqrt(dk * deg_(m)));
    };
    adjust(t);
    for (const auto& e : touched) adjust(e.node);
    return acc;
  };

  const double dt = new_deg(t);
  const Matrix& w1 = params_->w1;
  RowVector z = (new_pre(t).cwiseMax(0.0) * w1) / dt;
  for (Index k : new_neighbors(t)) z += (new_pre(k).cwiseMax(0.0) * w1) / std::sqrt(dt * new_deg(k));
  return z;
}

RowVector LocalForward::incident_gradient(Index t, int label) const {
  const Index n = graph_->num_nodes();
  const Matrix& w1 = params_->w1;
  const auto& nt = neighbors_[static_cast<std::size_t>(t)];

  // dL/dZ_t for -ln softmax(Z_t)[label]; every other logit row has zero gradient.
  const RowVector z = logits(t);
  RowVector g_logit = (z.array() - z.maxCoeff()).exp();
  g_logit /= g_logit.sum();
  g_logit(label) -= 1.0;

  // Rows of dL/d(pre) are non-zero only on S = {t} + N(t).
  std::vector<Index> support;
  support.reserve(nt.size() + 1);
  support.push_back(t);
  support.insert(support.end(), nt.begin(), nt.end());
  auto a_bar = [&](Index i, Index j) { return 1.0 / std::sqrt(deg_(i) * deg_(j)); };
  Matrix g_pre(static_cast<Index>(support.size()), xw_.cols());
  std::vector<Index> slot(static_cast<std::size_t>(n), -1);
  for (std::size_t s = 0; s < support.size(); ++s) {
    const Index m = support[s];
    slot[static_cast<std::size_t>(m)] = static_cast<Index>(s);
    const RowVector g_hidden = a_bar(t, m) * (g_logit * w1.transpose());
    g_pre.row(static_cast<Index>(s)) =
        g_hidden.cwiseProduct((pre_.row(m).array() > 0.0).cast<double>().matrix());
  }

  // dL/dA_bar_kj = [k == t] g_logit . message_j + g_pre_k . xw_j
  const Eigen::VectorXd via_logits = message_ * g_logit.transpose();
  auto g_abar = [&](Index k, Index j) {
    double v = k == t ? via_logits(j) : 0.0;
    const Index s = slot[static_cast<std::size_t>(k)];
    if (s >= 0) v += g_pre.row(s).dot(xw_.row(j));
    return v;
  };

  // s_k = sum_j (G_kj + G_jk) A_bar_kj, accumulated over the non-zero rows of G.
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (Index k : support) {
    auto visit = [&](Index m) {
      const double v = g_abar(k, m) * a_bar(k, m);
      s(k) += v;
      s(m) += v;
    };
    visit(k);
    for (Index m : neighbors_[static_cast<std::size_t>(k)]) visit(m);
  }
  const Eigen::VectorXd g_deg = -0.5 * s.cwiseQuotient(deg_);

  const Eigen::VectorXd row_t = via_logits + xw_ * g_pre.row(0).transpose();
  RowVector out(n);
  for (Index j = 0; j < n; ++j) {
    if (j == t) {
      out(j) = 0.0;
      continue;
    }
    const double r = a_bar(t, j);
    const double d_tj = row_t(j) * r + g_deg(t);
    const double d_jt = g_abar(j, t) * r + g_deg(j);
    out(j) = 0.5 * (d_tj + d_jt);
  }
  return out;
}

}  // namespace advgraph
