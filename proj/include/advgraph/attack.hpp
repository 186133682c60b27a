#pragma once

#include "advgraph/gcn.hpp"
#include "advgraph/graph.hpp"
#include "advgraph/local_forward.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace advgraph {

enum class AttackMethod { fga, nettack, random };

std::string to_string(AttackMethod method);
AttackMethod parse_attack_method(const std::string& text);

struct AttackConfig {
  AttackMethod method = AttackMethod::fga;
  int budget = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Result of attacking one target node.
struct AttackOutcome {
  Index target = 0;
  std::vector<Flip> chosen_flips;
  Graph perturbed;
  bool success = false;       ///< prediction on `perturbed` differs from the true label
  int predicted_before = 0;
  int predicted_after = 0;
  double margin_before = 0.0;  ///< classification margin on the input graph
  double margin_after = 0.0;   ///< classification margin on `perturbed`
};

/// Fast gradient attack: each step flips the target-incident link whose
/// adjacency gradient has the largest magnitude among sign-feasible candidates
/// (adding needs a positive gradient, removing a negative one). Ties and the
/// case with no sign-feasible candidate fall back to the lowest-index candidate.
AttackOutcome fga(const ModelParams& p, const Graph& g, const NodeSplit& split, Index target,
                  int budget = 1);
/// Same attack reusing a cached forward pass of `base.graph()`.
AttackOutcome fga(const LocalForward& base, const NodeSplit& split, Index target, int budget = 1);

/// Score-based attack: each step applies the flip that most increases the
/// target's classification margin, skipping flips that would isolate a node.
AttackOutcome nettack_lite(const ModelParams& p, const Graph& g, const NodeSplit& split,
                           Index target, int budget = 1);
AttackOutcome nettack_lite(const LocalForward& base, const NodeSplit& split, Index target,
                           int budget = 1);

/// Uniformly random incident flips (control baseline), deterministic in seed.
AttackOutcome random_flip(const ModelParams& p, const Graph& g, const NodeSplit& split,
                          Index target, int budget, std::uint64_t seed);
AttackOutcome random_flip(const LocalForward& base, const NodeSplit& split, Index target,
                          int budget, std::uint64_t seed);

/// Flips chosen by random_flip, without any model evaluation.
std::vector<Flip> sample_random_flips(const Graph& g, Index target, int budget,
                                      std::uint64_t seed);

/// Dispatches on cfg.method. The seed of the random baseline is mixed with the
/// target id so that per-target draws are independent.
AttackOutcome run_attack(const AttackConfig& cfg, const LocalForward& base, const NodeSplit& split,
                         Index target);

struct RankedFlip {
  Flip flip;
  double delta_loss = 0.0;  ///< change of the target's cross-entropy at T = 1
};

/// Exhaustive single-flip search by full forward recomputation, sorted by
/// descending loss change (ties keep candidate order). Throws TooLarge for n > 500.
std::vector<RankedFlip> brute_force_oracle(const ModelParams& p, const Graph& g,
                                           const NodeSplit& split, Index target);

/// Margin change of every non-isolating nettack_lite candidate, in candidate order.
std::vector<RankedFlip> nettack_scores(const LocalForward& base, const NodeSplit& split,
                                       Index target);

}  // namespace advgraph
