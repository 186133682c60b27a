#include "advgraph/defense.hpp"

#include "advgraph/errors.hpp"
#include "advgraph/local_forward.hpp"
#include "advgraph/parallel.hpp"

#include <json.hpp>

#include <fstream>
#include <map>
#include <sstream>

namespace advgraph {

using nlohmann::json;

std::string to_string(DefenseStrategy strategy) {
  switch (strategy) {
    case DefenseStrategy::none: return "none";
    case DefenseStrategy::at: return "at";
    case DefenseStrategy::global_at: return "global-at";
    case DefenseStrategy::target_at: return "target-at";
    case DefenseStrategy::sd: return "sd";
    case DefenseStrategy::scel: return "scel";
    case DefenseStrategy::ensemble: return "ensemble";
  }
  return "?";
}

DefenseStrategy parse_defense_strategy(const std::string& text) {
  for (auto s : {DefenseStrategy::none, DefenseStrategy::at, DefenseStrategy::global_at,
                 DefenseStrategy::target_at, DefenseStrategy::sd, DefenseStrategy::scel,
                 DefenseStrategy::ensemble})
    if (to_string(s) == text) return s;
  throw ConfigError("unknown defense '" + text + "'");
}

void DefenseSpec::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("defense temperature must be positive");
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw ConfigError("drop rate must be in [0, 1)");
  if (training_attack == AttackMethod::random)
    throw ConfigError("adversarial training needs fga or nettack");
  if (protected_label && *protected_label < 0) throw ConfigError("protected label must be >= 0");
}

namespace {

AttackOutcome attack_one(const LocalForward& fwd, const NodeSplit& split, Index node,
                         AttackMethod method) {
  return method == AttackMethod::nettack ? nettack_lite(fwd, split, node, 1)
                                         : fga(fwd, split, node, 1);
}

struct Proposal {
  std::optional<Flip> flip;
  std::string error;
};

DefendedModel from_train(TrainResult r, const Graph& g, const DefenseSpec& spec) {
  DefendedModel out;
  out.params = std::move(r.params);
  out.training_graph = g;
  out.spec = spec;
  out.train_accuracy = r.train_accuracy;
  out.val_accuracy = r.val_accuracy;
  return out;
}

Matrix soft_labels_of(const ModelParams& teacher, const Graph& g, double temperature) {
  return softmax_rows(forward(teacher, g, 1.0).logits, temperature);
}

DefendedModel adversarial_retrain(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                                  const DefenseSpec& spec, std::span<const Index> scope) {
  TrainConfig base_cfg = cfg;
  base_cfg.loss_mode = LossMode::ce;
  base_cfg.temperature = 1.0;
  const ModelParams initial = train(g, split, base_cfg).params;
  AdversarialGraph adv = generate_adversarial_graph(g, split, initial, scope, spec);
  DefendedModel out = from_train(train(adv.graph, split, base_cfg), adv.graph, spec);
  out.initial = initial;
  out.applied = std::move(adv.applied);
  out.skipped = std::move(adv.skipped);
  return out;
}

}  // namespace

AdversarialGraph generate_adversarial_graph(const Graph& g, const NodeSplit& split,
                                            const ModelParams& model,
                                            std::span<const Index> scope,
                                            const DefenseSpec& spec) {
  std::vector<Index> nodes(scope.begin(), scope.end());
  std::sort(nodes.begin(), nodes.end());
  nodes.erase(std::unique(nodes.begin(), nodes.end()), nodes.end());

  AdversarialGraph out;
  if (spec.evolving_adversary) {
    Graph current = g;
    for (Index v : nodes) {
      try {
        const LocalForward fwd(model, current);
        const Flip f = attack_one(fwd, split, v, spec.training_attack).chosen_flips.front();
        const Flip one[] = {f};
        current = current.with_flips(one);
        out.applied.push_back({v, f, ""});
      } catch (const NoFeasibleFlip& e) {
        out.skipped.push_back({v, Flip{v, v, 0}, e.what()});
      }
    }
    out.graph = std::move(current);
    return out;
  }

  const LocalForward fwd(model, g);
  std::vector<Proposal> proposals(nodes.size());
  parallel_for(
      nodes.size(),
      [&](std::size_t k) {
        try {
          proposals[k].flip = attack_one(fwd, split, nodes[k], spec.training_attack).chosen_flips.front();
        } catch (const NoFeasibleFlip& e) {
          proposals[k].error = e.what();
        }
      },
      spec.threads);

  std::map<std::pair<Index, Index>, int> overlay;
  std::vector<Flip> flips;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    const Index v = nodes[k];
    if (!proposals[k].flip) {
      out.skipped.push_back({v, Flip{v, v, 0}, proposals[k].error});
      continue;
    }
    const Flip f = *proposals[k].flip;
    const auto key = std::make_pair(f.lo(), f.hi());
    const auto it = overlay.find(key);
    const int current = it != overlay.end() ? it->second : g.adjacency()(f.lo(), f.hi());
    const int next = current + f.theta;
    if (next != 0 && next != 1) {
      out.skipped.push_back({v, f, f.theta > 0 ? "link already added" : "link already removed"});
      continue;
    }
    overlay[key] = next;
    flips.push_back(f);
    out.applied.push_back({v, f, ""});
  }
  out.graph = g.with_flips(flips);
  return out;
}

EdgeList drop_edges(const EdgeList& edges, double rate, std::mt19937_64& rng) {
  std::bernoulli_distribution keep(1.0 - rate);
  EdgeList out;
  out.reserve(edges.size());
  for (const auto& e : edges)
    if (keep(rng)) out.push_back(e);
  return out;
}

int majority_train_label(const NodeSplit& split) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(split.num_classes), 0);
  for (Index v : split.train) ++counts[static_cast<std::size_t>(split.labels[static_cast<std::size_t>(v)])];
  return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

DefendedModel train_undefended(const Graph& g, const NodeSplit& split, const TrainConfig& cfg) {
  TrainConfig c = cfg;
  c.loss_mode = LossMode::ce;
  c.temperature = 1.0;
  DefenseSpec spec;
  spec.strategy = DefenseStrategy::none;
  return from_train(train(g, split, c), g, spec);
}

DefendedModel at_random_drop(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                             const DefenseSpec& spec) {
  spec.validate();
  TrainConfig c = cfg;
  c.loss_mode = LossMode::ce;
  c.temperature = 1.0;
  const EdgeList edges = g.edge_list();
  std::mt19937_64 rng(spec.seed);
  SparseMatrix current;
  auto provider = [&](int) -> const SparseMatrix& {
    current = normalized_adjacency_sparse(g.num_nodes(), drop_edges(edges, spec.drop_rate, rng));
    return current;
  };
  return from_train(train(g, split, c, provider), g, spec);
}

DefendedModel global_at(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                        const DefenseSpec& spec) {
  spec.validate();
  return adversarial_retrain(g, split, cfg, spec, split.train);
}

DefendedModel target_at(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                        const DefenseSpec& spec) {
  spec.validate();
  if (!spec.protected_label) throw ConfigError("target-at needs a protected label");
  const int label = *spec.protected_label;
  std::vector<Index> scope;
  for (Index v : split.train)
    if (split.labels[static_cast<std::size_t>(v)] == label) scope.push_back(v);
  if (scope.empty())
    throw EmptyScope("no training node has label " + std::to_string(label));
  return adversarial_retrain(g, split, cfg, spec, scope);
}

DefendedModel smoothing_distillation(const Graph& g, const NodeSplit& split,
                                     const TrainConfig& cfg, const DefenseSpec& spec) {
  spec.validate();
  TrainConfig teacher_cfg = cfg;
  teacher_cfg.loss_mode = LossMode::ce;
  teacher_cfg.temperature = spec.temperature;
  const ModelParams teacher = train(g, split, teacher_cfg).params;
  const Matrix soft = soft_labels_of(teacher, g, spec.temperature);

  TrainConfig student_cfg = cfg;
  student_cfg.loss_mode = LossMode::combined;
  student_cfg.combined_hard = LossMode::ce;
  student_cfg.temperature = spec.temperature;
  DefendedModel out = from_train(train(g, split, student_cfg, &soft), g, spec);
  out.teacher = teacher;
  return out;
}

DefendedModel scel_train(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                         const DefenseSpec& spec) {
  spec.validate();
  TrainConfig c = cfg;
  c.loss_mode = LossMode::scel;
  c.temperature = 1.0;
  return from_train(train(g, split, c), g, spec);
}

DefendedModel ensemble(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                       const DefenseSpec& spec) {
  spec.validate();
  TrainConfig base_cfg = cfg;
  base_cfg.loss_mode = LossMode::ce;
  base_cfg.temperature = 1.0;
  const ModelParams initial = train(g, split, base_cfg).params;
  AdversarialGraph adv = generate_adversarial_graph(g, split, initial, split.train, spec);

  TrainConfig teacher_cfg = cfg;
  teacher_cfg.loss_mode = LossMode::scel;
  teacher_cfg.temperature = spec.temperature;
  const ModelParams teacher = train(adv.graph, split, teacher_cfg).params;
  const Matrix soft = soft_labels_of(teacher, adv.graph, spec.temperature);

  TrainConfig student_cfg = cfg;
  student_cfg.loss_mode = LossMode::combined;
  student_cfg.combined_hard = LossMode::scel;
  student_cfg.temperature = spec.temperature;
  DefendedModel out = from_train(train(adv.graph, split, student_cfg, &soft), adv.graph, spec);
  out.teacher = teacher;
  out.initial = initial;
  out.applied = std::move(adv.applied);
  out.skipped = std::move(adv.skipped);
  return out;
}

DefendedModel build_defense(const Graph& g, const NodeSplit& split, const TrainConfig& cfg,
                            const DefenseSpec& spec) {
  switch (spec.strategy) {
    case DefenseStrategy::none: {
      DefendedModel out = train_undefended(g, split, cfg);
      out.spec = spec;
      return out;
    }
    case DefenseStrategy::at: return at_random_drop(g, split, cfg, spec);
    case DefenseStrategy::global_at: return global_at(g, split, cfg, spec);
    case DefenseStrategy::target_at: return target_at(g, split, cfg, spec);
    case DefenseStrategy::sd: return smoothing_distillation(g, split, cfg, spec);
    case DefenseStrategy::scel: return scel_train(g, split, cfg, spec);
    case DefenseStrategy::ensemble: return ensemble(g, split, cfg, spec);
  }
  throw ConfigError("unknown defense");
}

namespace {

json flips_to_json(const std::vector<ScheduledFlip>& flips) {
  json out = json::array();
  for (const auto& f : flips)
    out.push_back({{"node", f.node}, {"i", f.flip.i}, {"j", f.flip.j}, {"theta", f.flip.theta},
                   {"note", f.note}});
  return out;
}

std::vector<ScheduledFlip> flips_from_json(const json& arr) {
  std::vector<ScheduledFlip> out;
  for (const auto& e : arr)
    out.push_back({e.at("node").get<Index>(),
                   Flip{e.at("i").get<Index>(), e.at("j").get<Index>(), e.at("theta").get<int>()},
                   e.at("note").get<std::string>()});
  return out;
}

}  // namespace

void save_defended_model(const std::filesystem::path& dir, const DefendedModel& model) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  save_checkpoint(dir / "model.ckpt", model.params);
  if (model.teacher) save_checkpoint(dir / "teacher.ckpt", *model.teacher);
  if (model.initial) save_checkpoint(dir / "initial.ckpt", *model.initial);

  std::ofstream edges(dir / "training_graph.edges");
  for (const auto& [i, j] : model.training_graph.edge_list()) edges << i << ' ' << j << '\n';
  if (!edges) throw IoError("cannot write training graph to " + dir.string());

  const DefenseSpec& s = model.spec;
  json meta = {
      {"strategy", to_string(s.strategy)},
      {"temperature", s.temperature},
      {"protected_label", s.protected_label ? json(*s.protected_label) : json(nullptr)},
      {"drop_rate", s.drop_rate},
      {"training_attack", to_string(s.training_attack)},
      {"evolving_adversary", s.evolving_adversary},
      {"seed", s.seed},
      {"num_nodes", model.training_graph.num_nodes()},
      {"num_edges", model.training_graph.num_edges()},
      {"train_accuracy", model.train_accuracy},
      {"val_accuracy", model.val_accuracy},
      {"applied", flips_to_json(model.applied)},
      {"skipped", flips_to_json(model.skipped)},
  };
  std::ofstream out(dir / "defense.json");
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + (dir / "defense.json").string());
}

DefendedModel load_defended_model(const std::filesystem::path& dir, const Graph& base) {
  std::ifstream in(dir / "defense.json");
  if (!in) throw IoError("cannot read " + (dir / "defense.json").string());
  json meta;
  try {
    meta = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed defense.json: " + std::string(e.what()));
  }

  DefendedModel out;
  try {
    out.spec.strategy = parse_defense_strategy(meta.at("strategy").get<std::string>());
    out.spec.temperature = meta.at("temperature").get<double>();
    if (!meta.at("protected_label").is_null())
      out.spec.protected_label = meta.at("protected_label").get<int>();
    out.spec.drop_rate = meta.at("drop_rate").get<double>();
    out.spec.training_attack = parse_attack_method(meta.at("training_attack").get<std::string>());
    out.spec.evolving_adversary = meta.at("evolving_adversary").get<bool>();
    out.spec.seed = meta.at("seed").get<std::uint64_t>();
    out.train_accuracy = meta.at("train_accuracy").get<double>();
    out.val_accuracy = meta.at("val_accuracy").get<double>();
    out.applied = flips_from_json(meta.at("applied"));
    out.skipped = flips_from_json(meta.at("skipped"));
  } catch (const json::exception& e) {
    throw IoError("malformed defense.json: " + std::string(e.what()));
  }

  out.params = load_checkpoint(dir / "model.ckpt");
  if (std::filesystem::exists(dir / "teacher.ckpt")) out.teacher = load_checkpoint(dir / "teacher.ckpt");
  if (std::filesystem::exists(dir / "initial.ckpt")) out.initial = load_checkpoint(dir / "initial.ckpt");

  std::ifstream edges_in(dir / "training_graph.edges");
  if (!edges_in) throw IoError("cannot read training graph in " + dir.string());
  EdgeList edges;
  Index i = 0, j = 0;
  while (edges_in >> i >> j) edges.emplace_back(i, j);
  out.training_graph = Graph::from_edges(base.name(), base.num_nodes(), edges, base.shared_features());
  return out;
}

}  // namespace advgraph
