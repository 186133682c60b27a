#include "advgraph/evaluation.hpp"

#include "advgraph/community.hpp"
#include "advgraph/errors.hpp"
#include "advgraph/local_forward.hpp"
#include "advgraph/parallel.hpp"

#include <algorithm>
#include <random>

namespace advgraph {

void EvalReport::recompute() {
  asr = advgraph::asr(records);
  if (detector == "gcn") acd = advgraph::acd(records);
  protected_asr.reset();
  protected_acd.reset();
  if (protected_label) {
    const auto slice = slice_by_label(records, *protected_label);
    if (std::any_of(slice.begin(), slice.end(), [](const NodeRecord& r) { return r.correct_before; })) {
      protected_asr = advgraph::asr(slice);
      if (detector == "gcn") protected_acd = advgraph::acd(slice);
    }
  }
  adr.reset();
  protected_adr.reset();
  if (baseline_asr && *baseline_asr > 0.0) adr = advgraph::adr(*baseline_asr, asr);
  if (protected_asr && protected_baseline_asr && *protected_baseline_asr > 0.0)
    protected_adr = advgraph::adr(*protected_baseline_asr, *protected_asr);
}

void EvalReport::pair_with_baseline(const EvalReport& undefended) {
  baseline_asr = undefended.asr;
  if (protected_label) {
    protected_baseline_asr.reset();
    const auto slice = slice_by_label(undefended.records, *protected_label);
    if (std::any_of(slice.begin(), slice.end(), [](const NodeRecord& r) { return r.correct_before; }))
      protected_baseline_asr = advgraph::asr(slice);
  }
  recompute();
  if (!(undefended.asr > 0.0))
    throw UndefinedBaseline("baseline attack on " + dataset + " never succeeded; ADR undefined");
}

std::vector<Index> correctly_classified(const ModelParams& model, const Graph& g,
                                        const NodeSplit& split) {
  const Prediction pred = predict(model, g);
  std::vector<Index> out;
  for (Index v : split.test)
    if (pred.labels[static_cast<std::size_t>(v)] == split.labels[static_cast<std::size_t>(v)]) out.push_back(v);
  return out;
}

std::vector<Index> sample_targets(std::vector<Index> nodes, std::size_t cap, std::uint64_t seed) {
  std::sort(nodes.begin(), nodes.end());
  if (nodes.size() > cap) {
    std::mt19937_64 rng(seed);
    std::shuffle(nodes.begin(), nodes.end(), rng);
    nodes.resize(cap);
    std::sort(nodes.begin(), nodes.end());
  }
  return nodes;
}

namespace {

NodeRecord identity_record(const LocalForward& fwd, const NodeSplit& split, Index v) {
  NodeRecord r;
  r.node = v;
  r.label = split.labels[static_cast<std::size_t>(v)];
  r.cd_before = r.cd_after = classification_margin(softmax_rows(fwd.logits(v), 1.0), r.label);
  r.success = false;
  return r;
}

nlohmann::json attack_json(const AttackConfig& attack, const EvalOptions& options) {
  return {{"attack", to_string(attack.method)},
          {"budget", attack.budget},
          {"attack_seed", attack.seed},
          {"max_targets", options.max_targets},
          {"target_seed", options.seed}};
}

}  // namespace

EvalReport evaluate_attack(const ModelParams& model, const Graph& g, const NodeSplit& split,
                           const AttackConfig& attack, const EvalOptions& options) {
  if (attack.budget < 0) throw ConfigError("attack budget must be >= 0");
  const std::vector<Index> population = correctly_classified(model, g, split);
  if (population.empty()) throw EmptySet("no test node is classified correctly");
  const std::vector<Index> targets = sample_targets(population, options.max_targets, options.seed);

  const LocalForward base(model, g);
  std::vector<NodeRecord> records(targets.size());
  parallel_for(
      targets.size(),
      [&](std::size_t k) {
        const Index v = targets[k];
        if (attack.budget == 0) {
          records[k] = identity_record(base, split, v);
          return;
        }
        const AttackOutcome o = run_attack(attack, base, split, v);
        NodeRecord& r = records[k];
        r.node = v;
        r.label = split.labels[static_cast<std::size_t>(v)];
        r.success = o.success;
        r.cd_before = o.margin_before;
        r.cd_after = o.margin_after;
        r.flips = o.chosen_flips;
      },
      options.threads);

  EvalReport report;
  report.dataset = g.name();
  report.attack = to_string(attack.method);
  report.population = population.size();
  report.protected_label = options.protected_label;
  report.records = std::move(records);
  report.accuracy = accuracy(model, g, split, split.test);
  report.config = attack_json(attack, options);
  report.config["targets_evaluated"] = targets.size();
  report.recompute();
  return report;
}

EvalReport community_attack_eval(const ModelParams& model, const Graph& g, const NodeSplit& split,
                                 const AttackConfig& attack, const EvalOptions& options,
                                 std::uint64_t louvain_seed,
                                 std::optional<std::vector<Index>> targets) {
  if (attack.budget < 0) throw ConfigError("attack budget must be >= 0");
  const Partition before = louvain(g, louvain_seed).partition;
  const std::vector<Index> candidates = targets ? *targets : split.test;

  std::vector<Index> eligible;
  for (Index v : candidates) {
    const auto peers = label_peers(split.labels, v);
    if (deception_eligible(before, v, peers)) eligible.push_back(v);
  }
  if (eligible.empty()) throw EmptySet("no target satisfies the community before-condition");
  const std::vector<Index> chosen = sample_targets(eligible, options.max_targets, options.seed);

  const LocalForward base(model, g);
  std::vector<NodeRecord> records(chosen.size());
  parallel_for(
      chosen.size(),
      [&](std::size_t k) {
        const Index v = chosen[k];
        if (attack.budget == 0) {
          records[k] = identity_record(base, split, v);
          return;
        }
        const AttackOutcome o = run_attack(attack, base, split, v);
        const Partition after = louvain(o.perturbed, louvain_seed).partition;
        NodeRecord& r = records[k];
        r.node = v;
        r.label = split.labels[static_cast<std::size_t>(v)];
        r.success = deception_success(before, after, v, label_peers(split.labels, v));
        r.cd_before = o.margin_before;
        r.cd_after = o.margin_after;
        r.flips = o.chosen_flips;
      },
      options.threads);

  EvalReport report;
  report.dataset = g.name();
  report.attack = to_string(attack.method);
  report.detector = "louvain";
  report.population = eligible.size();
  report.protected_label = options.protected_label;
  report.records = std::move(records);
  report.accuracy = accuracy(model, g, split, split.test);
  report.config = attack_json(attack, options);
  report.config["targets_evaluated"] = chosen.size();
  report.config["louvain_seed"] = louvain_seed;
  report.config["transfer"] = "attack crafted on the GCN, scored by Louvain on the perturbed graph";
  report.recompute();
  return report;
}

}  // namespace advgraph
