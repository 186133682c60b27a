#include "advgraph/attack.hpp"

#include "advgraph/errors.hpp"
#include "advgraph/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <random>

namespace advgraph {

std::string to_string(AttackMethod method) {
  switch (method) {
    case AttackMethod::fga: return "fga";
    case AttackMethod::nettack: return "nettack";
    case AttackMethod::random: return "random";
  }
  return "?";
}

AttackMethod parse_attack_method(const std::string& text) {
  if (text == "fga") return AttackMethod::fga;
  if (text == "nettack") return AttackMethod::nettack;
  if (text == "random") return AttackMethod::random;
  throw ConfigError("unknown attack '" + text + "'");
}

void AttackConfig::validate() const {
  if (budget < 1) throw ConfigError("attack budget must be >= 1");
}

namespace {

using Chooser = std::function<Flip(const LocalForward&, const std::vector<Flip>&, int step)>;

bool same_pair(const Flip& a, const Flip& b) { return a.lo() == b.lo() && a.hi() == b.hi(); }

/// Candidates on the current graph, minus pairs this attack already touched.
std::vector<Flip> open_candidates(const Graph& g, Index target, const std::vector<Flip>& chosen) {
  std::vector<Flip> out = candidate_flips(g, target);
  std::erase_if(out, [&](const Flip& f) {
    return std::any_of(chosen.begin(), chosen.end(), [&](const Flip& c) { return same_pair(c, f); });
  });
  return out;
}

AttackOutcome run_loop(const LocalForward& base, const NodeSplit& split, Index target, int budget,
                       const Chooser& choose) {
  if (budget < 1) throw ConfigError("attack budget must be >= 1");
  const Graph& g = base.graph();
  if (target < 0 || target >= g.num_nodes()) throw NoFeasibleFlip("target out of range");

  std::vector<Flip> chosen;
  std::unique_ptr<Graph> current_graph;
  std::unique_ptr<LocalForward> current;
  for (int step = 0; step < budget; ++step) {
    const LocalForward& fwd = current ? *current : base;
    const std::vector<Flip> candidates = open_candidates(fwd.graph(), target, chosen);
    if (candidates.empty())
      throw NoFeasibleFlip("no feasible flip for target " + std::to_string(target));
    chosen.push_back(choose(fwd, candidates, step));
    if (step + 1 < budget) {
      auto next_graph = std::make_unique<Graph>(g.with_flips(chosen));
      auto next = std::make_unique<LocalForward>(base.params(), *next_graph);
      current = std::move(next);
      current_graph = std::move(next_graph);
    }
  }

  const int label = split.labels[static_cast<std::size_t>(target)];
  AttackOutcome out;
  out.target = target;
  out.perturbed = g.with_flips(chosen);
  const RowVector before = softmax_rows(base.logits(target), 1.0);
  const RowVector after = softmax_rows(base.logits_after(target, chosen), 1.0);
  out.predicted_before = argmax_row(before);
  out.predicted_after = argmax_row(after);
  out.margin_before = classification_margin(before, label);
  out.margin_after = classification_margin(after, label);
  out.success = out.predicted_after != label;
  out.chosen_flips = std::move(chosen);
  return out;
}

double target_margin(const RowVector& logits, int label) {
  return classification_margin(softmax_rows(logits, 1.0), label);
}

/// Would removing this link leave one of its endpoints without neighbours?
bool isolates_node(const LocalForward& fwd, const Flip& f) {
  if (f.theta > 0) return false;
  return fwd.degree(f.i) <= 1 || fwd.degree(f.j) <= 1;
}

Flip choose_fga(const LocalForward& fwd, const std::vector<Flip>& candidates, Index target,
                int label) {
  const RowVector grad = fwd.incident_gradient(target, label);
  const Flip* best = nullptr;
  double best_mag = 0.0;
  for (const auto& f : candidates) {
    const Index other = f.i == target ? f.j : f.i;
    const double gv = grad(other);
    const bool feasible = (f.theta > 0 && gv > 0.0) || (f.theta < 0 && gv < 0.0);
    if (feasible && std::abs(gv) > best_mag) {
      best_mag = std::abs(gv);
      best = &f;
    }
  }
  return best ? *best : candidates.front();
}

std::uint64_t mix_seed(std::uint64_t seed, Index target) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(target) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

AttackOutcome fga(const LocalForward& base, const NodeSplit& split, Index target, int budget) {
  const int label = split.labels[static_cast<std::size_t>(target)];
  return run_loop(base, split, target, budget,
                  [&](const LocalForward& fwd, const std::vector<Flip>& candidates, int) {
                    return choose_fga(fwd, candidates, target, label);
                  });
}

AttackOutcome fga(const ModelParams& p, const Graph& g, const NodeSplit& split, Index target,
                  int budget) {
  const LocalForward base(p, g);
  return fga(base, split, target, budget);
}

std::vector<RankedFlip> nettack_scores(const LocalForward& fwd, const NodeSplit& split,
                                       Index target) {
  const int label = split.labels[static_cast<std::size_t>(target)];
  const double current = target_margin(fwd.logits(target), label);
  std::vector<RankedFlip> out;
  for (const auto& f : candidate_flips(fwd.graph(), target)) {
    if (isolates_node(fwd, f)) continue;
    const Flip one[] = {f};
    out.push_back({f, target_margin(fwd.logits_after(target, one), label) - current});
  }
  return out;
}

AttackOutcome nettack_lite(const LocalForward& base, const NodeSplit& split, Index target,
                           int budget) {
  const int label = split.labels[static_cast<std::size_t>(target)];
  return run_loop(
      base, split, target, budget,
      [&](const LocalForward& fwd, const std::vector<Flip>& candidates, int) {
        const double current = target_margin(fwd.logits(target), label);
        const Flip* best = nullptr;
        double best_score = -std::numeric_limits<double>::infinity();
        for (const auto& f : candidates) {
          if (isolates_node(fwd, f)) continue;
          const Flip one[] = {f};
          const double score = target_margin(fwd.logits_after(target, one), label) - current;
          if (score > best_score) {
            best_score = score;
            best = &f;
          }
        }
        if (!best)
          throw NoFeasibleFlip("every candidate flip for target " + std::to_string(target) +
                               " would isolate a node");
        return *best;
      });
}

AttackOutcome nettack_lite(const ModelParams& p, const Graph& g, const NodeSplit& split,
                           Index target, int budget) {
  const LocalForward base(p, g);
  return nettack_lite(base, split, target, budget);
}

AttackOutcome random_flip(const LocalForward& base, const NodeSplit& split, Index target,
                          int budget, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return run_loop(base, split, target, budget,
                  [&](const LocalForward&, const std::vector<Flip>& candidates, int) {
                    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
                    return candidates[pick(rng)];
                  });
}

AttackOutcome random_flip(const ModelParams& p, const Graph& g, const NodeSplit& split,
                          Index target, int budget, std::uint64_t seed) {
  const LocalForward base(p, g);
  return random_flip(base, split, target, budget, seed);
}

std::vector<Flip> sample_random_flips(const Graph& g, Index target, int budget,
                                      std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Flip> chosen;
  for (int step = 0; step < budget; ++step) {
    const std::vector<Flip> candidates = open_candidates(g, target, chosen);
    if (candidates.empty()) throw NoFeasibleFlip("no feasible flip");
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    chosen.push_back(candidates[pick(rng)]);
  }
  return chosen;
}

AttackOutcome run_attack(const AttackConfig& cfg, const LocalForward& base, const NodeSplit& split,
                         Index target) {
  switch (cfg.method) {
    case AttackMethod::fga: return fga(base, split, target, cfg.budget);
    case AttackMethod::nettack: return nettack_lite(base, split, target, cfg.budget);
    case AttackMethod::random:
      return random_flip(base, split, target, cfg.budget, mix_seed(cfg.seed, target));
  }
  throw ConfigError("unknown attack method");
}

std::vector<RankedFlip> brute_force_oracle(const ModelParams& p, const Graph& g,
                                           const NodeSplit& split, Index target) {
  if (g.num_nodes() > 500)
    throw TooLarge("exhaustive search is limited to 500 nodes, got " +
                   std::to_string(g.num_nodes()));
  const Index nodes[] = {target};
  auto target_loss = [&](const Graph& graph) {
    return loss_ce(forward(p, graph, 1.0).confidences, split, nodes);
  };
  const double base = target_loss(g);
  std::vector<RankedFlip> out;
  for (const auto& f : candidate_flips(g, target))
    out.push_back({f, target_loss(flip_edge(g, f)) - base});
  std::stable_sort(out.begin(), out.end(), [](const RankedFlip& a, const RankedFlip& b) {
    return a.delta_loss > b.delta_loss;
  });
  return out;
}

}  // namespace advgraph
