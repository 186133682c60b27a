#pragma once

#include "advgraph/attack.hpp"
#include "advgraph/gcn.hpp"
#include "advgraph/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace advgraph {

enum class DefenseStrategy { none, at, global_at, target_at, sd, scel, ensemble };

std::string to_string(DefenseStrategy strategy);
/// Accepts the CLI spellings: none, at, global-at, target-at, sd, scel, ensemble.
DefenseStrategy parse_defense_strategy(const std::string& text);

struct DefenseSpec {
  DefenseStrategy strategy = DefenseStrategy::none;
  double temperature = 10.0;
  /// Class whose training nodes are attacked by target-at.
  std::optional<int> protected_label;
  double drop_rate = 0.1;
  /// Attack used to build the adversarial graph (fga or nettack).
  AttackMethod training_attack = AttackMethod::fga;
  /// Attack each node against the graph as perturbed so far instead of the clean one.
  bool evolving_adversary = false;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const;
};

/// A flip proposed by the per-node attack and what happened to it.
struct ScheduledFlip {
  Index node = 0;
  Flip flip;
  std::string note;  ///< empty when applied, otherwise why it was skipped

  bool operator==(const ScheduledFlip&) const = default;
};

struct AdversarialGraph {
  Graph graph;
  std::vector<ScheduledFlip> applied;
  std::vector<ScheduledFlip> skipped;
};

/// One budget-1 attack per scope node against `model`, combined in ascending
/// node order. A flip that would create a duplicate link or remove a link that
/// is already gone is skipped and logged. Scope nodes use their own true label.
AdversarialGraph generate_adversarial_graph(const Graph& g, const NodeSplit& split,
                                            const ModelParams& model,
                                            std::span<const Index> scope,
                                            const DefenseSpec& spec);

struct DefendedModel {
  ModelParams params;
  Graph training_graph;
  DefenseSpec spec;
  std::optional<ModelParams> teacher;  ///< distillation teacher (sd, ensemble)
  std::optional<ModelParams> initial;  ///< undefended model used to craft the adversarial graph
  std::vector<ScheduledFlip> applied;
  std::vector<ScheduledFlip> skipped;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

/// Keeps each edge independently with probability 1 - rate.
EdgeList drop_edges(const EdgeList& edges, double rate, std::mt19937_64& rng);

/// Undefended GCN trained with cross-entropy.
DefendedModel train_undefended(const Graph& g, const NodeSplit& split, const TrainConfig& cfg);
/// Retrains on a fresh random edge drop every epoch.
DefendedModel at_random_drop(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                             const DefenseSpec& spec);
/// Retrains on the graph attacked at every training node.
DefendedModel global_at(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                        const DefenseSpec& spec);
/// Retrains on the graph attacked at training nodes of spec.protected_label.
/// Throws EmptyScope when that class has no training nodes.
DefendedModel target_at(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                        const DefenseSpec& spec);
/// Teacher at temperature T, student on the combined soft and hard loss.
DefendedModel smoothing_distillation(const Graph& g, const NodeSplit& split,
                                     const TrainConfig& cfg, const DefenseSpec& spec);
/// Cross-entropy replaced by the smoothing cross-entropy.
DefendedModel scel_train(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                         const DefenseSpec& spec);
/// Global adversarial graph, SCEL teacher at T, student on the combined loss
/// with SCEL as its hard term.
DefendedModel ensemble(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                       const DefenseSpec& spec);

/// Dispatches on spec.strategy.
DefendedModel build_defense(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                            const DefenseSpec& spec);

/// Class with the most training nodes (lowest index on ties).
int majority_train_label(const NodeSplit& split);

/// Writes model.ckpt, optional teacher.ckpt / initial.ckpt, training_graph.edges
/// and defense.json into dir.
void save_defended_model(const std::filesystem::path& dir, const DefendedModel& model);
/// Reads a directory written by save_defended_model. `base` supplies the node
/// count and features of the training graph.
DefendedModel load_defended_model(const std::filesystem::path& dir, const Graph& base);

}  // namespace advgraph
