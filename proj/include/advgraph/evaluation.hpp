#pragma once

#include "advgraph/attack.hpp"
#include "advgraph/gcn.hpp"
#include "advgraph/graph.hpp"
#include "advgraph/metrics.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace advgraph {

/// Aggregates of one (dataset, defense, attack) evaluation plus the per-node
/// records they were computed from.
struct EvalReport {
  std::string dataset;
  std::string defense = "none";
  std::string attack;
  std::string detector = "gcn";  ///< "gcn" or "louvain"

  double asr = 0.0;
  std::optional<double> adr;  ///< absent without a baseline
  std::optional<double> acd;  ///< absent for community evaluations
  std::optional<double> accuracy;  ///< clean test accuracy of the evaluated model
  std::optional<double> baseline_asr;

  std::size_t population = 0;  ///< |N_s| before sampling
  std::optional<int> protected_label;
  std::optional<double> protected_asr;
  std::optional<double> protected_adr;
  std::optional<double> protected_acd;
  std::optional<double> protected_baseline_asr;

  std::vector<NodeRecord> records;
  nlohmann::json config = nlohmann::json::object();

  /// Recomputes asr/acd (and protected_asr/acd) from records, and adr from the
  /// stored baselines. Community reports keep acd empty.
  void recompute();
  /// Sets baseline ASRs from an undefended report and recomputes ADR.
  void pair_with_baseline(const EvalReport& undefended);
};

struct EvalOptions {
  std::size_t max_targets = 500;
  std::uint64_t seed = 0;  ///< target sampling
  unsigned threads = 0;
  std::optional<int> protected_label;
};

/// Test nodes classified correctly by `model` on `g`.
std::vector<Index> correctly_classified(const ModelParams& model, const Graph& g,
                                        const NodeSplit& split);

/// Uniform sample without replacement of at most `cap` nodes, returned sorted.
std::vector<Index> sample_targets(std::vector<Index> nodes, std::size_t cap, std::uint64_t seed);

/// Attacks every sampled member of N_s on `g` with `model` as both the attacked
/// classifier and the attacker's surrogate. A zero budget is the identity
/// control: no flips, no successes. Throws EmptySet if N_s is empty.
EvalReport evaluate_attack(const ModelParams& model, const Graph& g, const NodeSplit& split,
                           const AttackConfig& attack, const EvalOptions& options);

/// Community deception: each target is attacked through `model`, Louvain is
/// rerun on the perturbed graph and deception_success is scored against the
/// label peers. `targets` defaults to the test set; those failing the before
/// condition are excluded from the population. ACD is left empty.
EvalReport community_attack_eval(const ModelParams& model, const Graph& g, const NodeSplit& split,
                                 const AttackConfig& attack, const EvalOptions& options,
                                 std::uint64_t louvain_seed,
                                 std::optional<std::vector<Index>> targets = std::nullopt);

}  // namespace advgraph
