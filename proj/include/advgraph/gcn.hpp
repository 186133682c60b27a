#pragma once

#include "advgraph/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace advgraph {

/// Weights of the two-layer GCN plus the softmax temperature it is served at.
struct ModelParams {
  Matrix w0;  ///< C x H
  Matrix w1;  ///< H x |F|
  double temperature = 1.0;
  Index num_nodes = 0;  ///< node count of the dataset the model was trained on

  Index input_dim() const { return w0.rows(); }
  Index hidden_dim() const { return w0.cols(); }
  Index num_classes() const { return w1.cols(); }
  bool operator==(const ModelParams&) const = default;
};

enum class LossMode { ce, scel, combined };

std::string to_string(LossMode mode);
LossMode parse_loss_mode(const std::string& text);

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.01;
  double weight_decay = 5e-4;  ///< applied to W0 only
  Index hidden_dim = 16;
  std::uint64_t seed = 0;
  LossMode loss_mode = LossMode::ce;
  /// Softmax temperature used for the training loss (the soft term under `combined`).
  double temperature = 1.0;
  /// Hard-label term of the combined loss.
  LossMode combined_hard = LossMode::ce;

  void validate() const;
};

/// Row-wise softmax of z / temperature.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& z,
                                               typename Derived::Scalar temperature) {
  using Scalar = typename Derived::Scalar;
  MatrixX<Scalar> scaled = z / temperature;
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row_max = scaled.rowwise().maxCoeff();
  scaled = (scaled.colwise() - row_max).array().exp().matrix();
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> norm = scaled.rowwise().sum();
  return norm.cwiseInverse().asDiagonal() * scaled;
}

struct ForwardResult {
  Matrix logits;       ///< Z
  Matrix confidences;  ///< softmax(Z / T)
};

/// Z = A_norm ReLU(A_norm X W0) W1 and its temperature softmax.
ForwardResult forward(const ModelParams& p, const SparseMatrix& a_norm, const SparseMatrix& x,
                      double temperature);
ForwardResult forward(const ModelParams& p, const Graph& g, double temperature = 1.0);

/// Smoothed target row of the smoothing cross-entropy: 1 on the true class and
/// 1/|F| on every other class (rows are deliberately not renormalized).
RowVector smoothing_target(int label, int num_classes);

/// -sum_l ln Y[l][label(l)]
double loss_ce(const Matrix& confidences, const NodeSplit& split, std::span<const Index> nodes);
/// -sum_l sum_k Yhat[l][k] ln Y[l][k] with Yhat from smoothing_target.
double loss_scel(const Matrix& confidences, const NodeSplit& split, std::span<const Index> nodes);
/// -sum_l sum_k soft[l][k] ln Y_T[l][k]
double loss_soft(const Matrix& confidences_t, const Matrix& soft_labels,
                 std::span<const Index> nodes);
/// L_s / (T^2 + 1) + T^2 L / (T^2 + 1)
double loss_combined(double soft_loss, double hard_loss, double temperature);

/// A loss over a node set, as used for training and for adjacency gradients.
struct Objective {
  LossMode mode = LossMode::ce;
  /// Softmax temperature of ce/scel, or of the soft term under combined.
  double temperature = 1.0;
  /// Teacher confidences (rows indexed by node); required for combined.
  const Matrix* soft_labels = nullptr;
  LossMode combined_hard = LossMode::ce;
};

/// Evaluates the objective on precomputed logits.
double objective_loss(const Matrix& logits, const NodeSplit& split, std::span<const Index> nodes,
                      const Objective& objective);
/// dL/dZ for the objective (rows outside `nodes` are zero).
Matrix objective_logit_gradient(const Matrix& logits, const NodeSplit& split,
                                std::span<const Index> nodes, const Objective& objective);

struct WeightGradients {
  double loss = 0.0;
  Matrix w0;
  Matrix w1;
};

/// Loss and exact gradients with respect to W0 and W1 (no regularization).
WeightGradients weight_gradients(const ModelParams& p, const SparseMatrix& a_norm,
                                 const SparseMatrix& x, const NodeSplit& split,
                                 std::span<const Index> nodes, const Objective& objective);

/// Symmetrized gradient 1/2 (dL/dA_ij + dL/dA_ji) of the objective with respect
/// to the raw adjacency, differentiating through the degree normalization.
Matrix grad_adjacency(const ModelParams& p, const Graph& g, const NodeSplit& split,
                      std::span<const Index> nodes, const Objective& objective);
Matrix grad_adjacency(const ModelParams& p, const Graph& g, const NodeSplit& split,
                      std::span<const Index> nodes, LossMode mode = LossMode::ce);

/// Unsymmetrized dL/dA for a dense real adjacency (entries treated independently).
Matrix grad_adjacency_raw(const ModelParams& p, const Matrix& adjacency, const SparseMatrix& x,
                          const NodeSplit& split, std::span<const Index> nodes,
                          const Objective& objective);

struct TrainResult {
  ModelParams params;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  std::vector<double> loss_history;  ///< regularized mean objective per epoch
};

/// Supplies the normalized adjacency used at a given epoch.
using EpochAdjacency = std::function<const SparseMatrix&(int epoch)>;

/// Glorot-uniform initialization driven by seed.
ModelParams init_params(Index input_dim, Index hidden_dim, Index num_classes, std::uint64_t seed);

/// Full-batch Adam on the configured loss over split.train. When soft labels are
/// given the loss mode must be `combined`. Throws DivergedLoss on a non-finite loss.
TrainResult train(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                  const Matrix* soft_labels = nullptr);
TrainResult train(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                  const EpochAdjacency& adjacency_for_epoch, const Matrix* soft_labels = nullptr);

struct Prediction {
  std::vector<int> labels;
  Matrix confidences;
};

/// Argmax labels at T = 1 (ties to the lowest class index).
Prediction predict(const ModelParams& p, const Graph& g);
int argmax_row(const Eigen::Ref<const RowVector>& row);

/// Binary checkpoint; layout in docs/checkpoint_format.md.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& p);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace advgraph
