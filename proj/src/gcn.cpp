#include "advgraph/gcn.hpp"

#include "advgraph/errors.hpp"

#include <cmath>
#include <random>
#include <string>

namespace advgraph {

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::ce: return "ce";
    case LossMode::scel: return "scel";
    case LossMode::combined: return "combined";
  }
  return "?";
}

LossMode parse_loss_mode(const std::string& text) {
  if (text == "ce") return LossMode::ce;
  if (text == "scel") return LossMode::scel;
  if (text == "combined") return LossMode::combined;
  throw ConfigError("unknown loss mode '" + text + "'");
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be positive");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (combined_hard == LossMode::combined) throw ConfigError("combined_hard must be ce or scel");
}

namespace {

void check_shapes(const ModelParams& p, const SparseMatrix& a_norm, const SparseMatrix& x) {
  if (a_norm.rows() != a_norm.cols()) throw ShapeMismatch("adjacency must be square");
  if (x.rows() != a_norm.rows())
    throw ShapeMismatch("feature rows (" + std::to_string(x.rows()) + ") != node count (" +
                        std::to_string(a_norm.rows()) + ")");
  if (x.cols() != p.w0.rows())
    throw ShapeMismatch("feature width (" + std::to_string(x.cols()) + ") != W0 rows (" +
                        std::to_string(p.w0.rows()) + ")");
  if (p.w0.cols() != p.w1.rows()) throw ShapeMismatch("W0 columns != W1 rows");
}

/// ln softmax(z / T) for one row.
RowVector log_softmax(const Eigen::Ref<const RowVector>& z, double temperature) {
  RowVector s = z / temperature;
  const double m = s.maxCoeff();
  const double lse = m + std::log((s.array() - m).exp().sum());
  return s.array() - lse;
}

RowVector hard_target(LossMode mode, int label, int num_classes) {
  if (mode == LossMode::scel) return smoothing_target(label, num_classes);
  RowVector t = RowVector::Zero(num_classes);
  t(label) = 1.0;
  return t;
}

/// -sum_k target_k ln softmax(z / T)_k and its gradient with respect to z.
double row_cross_entropy(const Eigen::Ref<const RowVector>& z, const RowVector& target,
                         double temperature, RowVector* grad) {
  const RowVector logp = log_softmax(z, temperature);
  if (grad) {
    const RowVector p = logp.array().exp();
    *grad = (target.sum() * p - target) / temperature;
  }
  return -(target.array() * logp.array()).sum();
}

}  // namespace

ForwardResult forward(const ModelParams& p, const SparseMatrix& a_norm, const SparseMatrix& x,
                      double temperature) {
  if (!(temperature > 0.0)) throw ShapeMismatch("temperature must be positive");
  check_shapes(p, a_norm, x);
  const Matrix xw = x * p.w0;
  const Matrix hidden = (a_norm * xw).cwiseMax(0.0);
  ForwardResult out;
  out.logits = a_norm * (hidden * p.w1);
  out.confidences = softmax_rows(out.logits, temperature);
  return out;
}

ForwardResult forward(const ModelParams& p, const Graph& g, double temperature) {
  return forward(p, normalized_adjacency_sparse(g), g.feature_matrix(), temperature);
}

RowVector smoothing_target(int label, int num_classes) {
  RowVector t = RowVector::Constant(num_classes, 1.0 / num_classes);
  t(label) = 1.0;
  return t;
}

double loss_ce(const Matrix& confidences, const NodeSplit& split, std::span<const Index> nodes) {
  double loss = 0.0;
  for (Index l : nodes) loss -= std::log(confidences(l, split.labels[static_cast<std::size_t>(l)]));
  return loss;
}

double loss_scel(const Matrix& confidences, const NodeSplit& split, std::span<const Index> nodes) {
  double loss = 0.0;
  for (Index l : nodes) {
    const RowVector t = smoothing_target(split.labels[static_cast<std::size_t>(l)], split.num_classes);
    loss -= (t.array() * confidences.row(l).array().log()).sum();
  }
  return loss;
}

double loss_soft(const Matrix& confidences_t, const Matrix& soft_labels,
                 std::span<const Index> nodes) {
  double loss = 0.0;
  for (Index l : nodes)
    loss -= (soft_labels.row(l).array() * confidences_t.row(l).array().log()).sum();
  return loss;
}

double loss_combined(double soft_loss, double hard_loss, double temperature) {
  const double t2 = temperature * temperature;
  return soft_loss / (t2 + 1.0) + t2 * hard_loss / (t2 + 1.0);
}

namespace {

double objective_impl(const Matrix& logits, const NodeSplit& split, std::span<const Index> nodes,
                      const Objective& obj, Matrix* grad) {
  if (obj.mode == LossMode::combined && obj.soft_labels == nullptr)
    throw ShapeMismatch("combined loss needs soft labels");
  if (obj.soft_labels && obj.soft_labels->cols() != logits.cols())
    throw ShapeMismatch("soft label width != class count");
  if (grad) *grad = Matrix::Zero(logits.rows(), logits.cols());
  const int classes = static_cast<int>(logits.cols());
  const double t2 = obj.temperature * obj.temperature;
  double total = 0.0;
  RowVector g_row, g_aux;
  for (Index l : nodes) {
    const int y = split.labels[static_cast<std::size_t>(l)];
    const auto z = logits.row(l);
    if (obj.mode == LossMode::combined) {
      const RowVector soft = obj.soft_labels->row(l);
      const double ls = row_cross_entropy(z, soft, obj.temperature, grad ? &g_row : nullptr);
      const double lh = row_cross_entropy(z, hard_target(obj.combined_hard, y, classes), 1.0,
                                          grad ? &g_aux : nullptr);
      total += loss_combined(ls, lh, obj.temperature);
      if (grad) grad->row(l) = g_row / (t2 + 1.0) + t2 * g_aux / (t2 + 1.0);
    } else {
      total += row_cross_entropy(z, hard_target(obj.mode, y, classes), obj.temperature,
                                 grad ? &g_row : nullptr);
      if (grad) grad->row(l) = g_row;
    }
  }
  return total;
}

}  // namespace

double objective_loss(const Matrix& logits, const NodeSplit& split, std::span<const Index> nodes,
                      const Objective& objective) {
  return objective_impl(logits, split, nodes, objective, nullptr);
}

Matrix objective_logit_gradient(const Matrix& logits, const NodeSplit& split,
                                std::span<const Index> nodes, const Objective& objective) {
  Matrix grad;
  objective_impl(logits, split, nodes, objective, &grad);
  return grad;
}

WeightGradients weight_gradients(const ModelParams& p, const SparseMatrix& a_norm,
                                 const SparseMatrix& x, const NodeSplit& split,
                                 std::span<const Index> nodes, const Objective& objective) {
  check_shapes(p, a_norm, x);
  const Matrix xw = x * p.w0;
  const Matrix pre = a_norm * xw;
  const Matrix hidden = pre.cwiseMax(0.0);
  const Matrix propagated = a_norm * hidden;
  const Matrix logits = propagated * p.w1;

  WeightGradients out;
  Matrix g_logits;
  out.loss = objective_impl(logits, split, nodes, objective, &g_logits);
  out.w1 = propagated.transpose() * g_logits;
  const Matrix g_hidden = a_norm.transpose() * (g_logits * p.w1.transpose());
  const Matrix g_pre = g_hidden.cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  out.w0 = x.transpose() * (a_norm.transpose() * g_pre);
  return out;
}

Matrix grad_adjacency_raw(const ModelParams& p, const Matrix& adjacency, const SparseMatrix& x,
                          const NodeSplit& split, std::span<const Index> nodes,
                          const Objective& objective) {
  const Index n = adjacency.rows();
  if (adjacency.cols() != n) throw ShapeMismatch("adjacency must be square");
  if (x.rows() != n || x.cols() != p.w0.rows() || p.w0.cols() != p.w1.rows())
    throw ShapeMismatch("parameter shapes do not match the graph");

  const Matrix tilde = adjacency + Matrix::Identity(n, n);
  const Eigen::VectorXd deg = tilde.rowwise().sum();
  const Eigen::VectorXd r = deg.array().rsqrt();
  const Matrix a_bar = r.asDiagonal() * tilde * r.asDiagonal();

  const Matrix xw = x * p.w0;
  const Matrix pre = a_bar * xw;
  const Matrix hidden = pre.cwiseMax(0.0);
  const Matrix message = hidden * p.w1;  // M, so that Z = A_bar M
  const Matrix logits = a_bar * message;

  Matrix g_logits;
  objective_impl(logits, split, nodes, objective, &g_logits);
  const Matrix g_message = a_bar.transpose() * g_logits;
  const Matrix g_pre =
      (g_message * p.w1.transpose()).cwiseProduct((pre.array() > 0.0).cast<double>().matrix());
  // dL/dA_bar from both propagation steps.
  const Matrix g_abar = g_logits * message.transpose() + g_pre * xw.transpose();

  // A_bar_ij = Atilde_ij r_i r_j with r = d^-1/2 and d_i the i-th row sum.
  const Matrix weighted = g_abar.cwiseProduct(a_bar);
  const Eigen::VectorXd g_deg =
      -0.5 * (weighted.rowwise().sum() + weighted.colwise().sum().transpose()).cwiseQuotient(deg);
  Matrix g_a = r.asDiagonal() * g_abar * r.asDiagonal();
  g_a.colwise() += g_deg;
  return g_a;
}

Matrix grad_adjacency(const ModelParams& p, const Graph& g, const NodeSplit& split,
                      std::span<const Index> nodes, const Objective& objective) {
  const Matrix raw = grad_adjacency_raw(p, g.adjacency().cast<double>(), g.feature_matrix(), split,
                                        nodes, objective);
  return 0.5 * (raw + raw.transpose());
}

Matrix grad_adjacency(const ModelParams& p, const Graph& g, const NodeSplit& split,
                      std::span<const Index> nodes, LossMode mode) {
  if (mode == LossMode::combined) throw ShapeMismatch("combined loss needs soft labels");
  Objective obj;
  obj.mode = mode;
  return grad_adjacency(p, g, split, nodes, obj);
}

ModelParams init_params(Index input_dim, Index hidden_dim, Index num_classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto glorot = [&rng](Index rows, Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Matrix w(rows, cols);
    for (Index i = 0; i < rows; ++i)
      for (Index j = 0; j < cols; ++j) w(i, j) = dist(rng);
    return w;
  };
  ModelParams p;
  p.w0 = glorot(input_dim, hidden_dim);
  p.w1 = glorot(hidden_dim, num_classes);
  return p;
}

namespace {

struct AdamState {
  Matrix m, v;
  explicit AdamState(const Matrix& like)
      : m(Matrix::Zero(like.rows(), like.cols())), v(Matrix::Zero(like.rows(), like.cols())) {}

  void step(Matrix& w, const Matrix& g, double lr, int t) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    m = beta1 * m + (1.0 - beta1) * g;
    v = beta2 * v + (1.0 - beta2) * g.cwiseAbs2();
    const double c1 = 1.0 - std::pow(beta1, t);
    const double c2 = 1.0 - std::pow(beta2, t);
    w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

double subset_accuracy(const Matrix& logits, const NodeSplit& split, std::span<const Index> nodes) {
  if (nodes.empty()) return 0.0;
  Index hits = 0;
  for (Index v : nodes)
    if (argmax_row(logits.row(v)) == split.labels[static_cast<std::size_t>(v)]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(nodes.size());
}

}  // namespace

TrainResult train(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                  const EpochAdjacency& adjacency_for_epoch, const Matrix* soft_labels) {
  cfg.validate();
  split.validate(g.num_nodes());
  if (split.train.empty()) throw ConfigError("training set is empty");
  if (soft_labels && cfg.loss_mode != LossMode::combined)
    throw ConfigError("soft labels require loss_mode = combined");
  if (cfg.loss_mode == LossMode::combined && !soft_labels)
    throw ConfigError("loss_mode = combined requires soft labels");
  if (soft_labels && (soft_labels->rows() != g.num_nodes() || soft_labels->cols() != split.num_classes))
    throw ShapeMismatch("soft labels must be n x |F|");

  const SparseMatrix x = g.feature_matrix();
  TrainResult result;
  ModelParams& p = result.params;
  p = init_params(g.feature_dim(), cfg.hidden_dim, split.num_classes, cfg.seed);
  p.num_nodes = g.num_nodes();
  p.temperature = cfg.loss_mode == LossMode::combined ? 1.0 : cfg.temperature;

  Objective obj;
  obj.mode = cfg.loss_mode;
  obj.temperature = cfg.temperature;
  obj.soft_labels = soft_labels;
  obj.combined_hard = cfg.combined_hard;

  AdamState adam0(p.w0), adam1(p.w1);
  const double scale = 1.0 / static_cast<double>(split.train.size());
  result.loss_history.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const SparseMatrix& a = adjacency_for_epoch(epoch);
    WeightGradients grads = weight_gradients(p, a, x, split, split.train, obj);
    const double loss = scale * grads.loss + 0.5 * cfg.weight_decay * p.w0.squaredNorm();
    if (!std::isfinite(loss))
      throw DivergedLoss("loss became non-finite at epoch " + std::to_string(epoch));
    result.loss_history.push_back(loss);
    grads.w0 = scale * grads.w0 + cfg.weight_decay * p.w0;
    grads.w1 *= scale;
    adam0.step(p.w0, grads.w0, cfg.learning_rate, epoch + 1);
    adam1.step(p.w1, grads.w1, cfg.learning_rate, epoch + 1);
  }

  const ForwardResult fwd = forward(p, normalized_adjacency_sparse(g), x, 1.0);
  result.train_accuracy = subset_accuracy(fwd.logits, split, split.train);
  result.val_accuracy = subset_accuracy(fwd.logits, split, split.val);
  return result;
}

TrainResult train(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                  const Matrix* soft_labels) {
  const SparseMatrix a = normalized_adjacency_sparse(g);
  return train(g, split, cfg, [&a](int) -> const SparseMatrix& { return a; }, soft_labels);
}

int argmax_row(const Eigen::Ref<const RowVector>& row) {
  int best = 0;
  for (Index k = 1; k < row.size(); ++k)
    if (row(k) > row(best)) best = static_cast<int>(k);
  return best;
}

Prediction predict(const ModelParams& p, const Graph& g) {
  ForwardResult fwd = forward(p, g, 1.0);
  Prediction out;
  out.labels.resize(static_cast<std::size_t>(g.num_nodes()));
  for (Index i = 0; i < g.num_nodes(); ++i)
    out.labels[static_cast<std::size_t>(i)] = argmax_row(fwd.confidences.row(i));
  out.confidences = std::move(fwd.confidences);
  return out;
}

}  // namespace advgraph
