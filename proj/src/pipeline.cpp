#include "advgraph/pipeline.hpp"

#include "advgraph/dataset.hpp"
#include "advgraph/errors.hpp"
#include "advgraph/evaluation.hpp"
#include "advgraph/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>

namespace advgraph {

using nlohmann::json;
namespace fs = std::filesystem;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void ExperimentConfig::finalize() {
  train.seed = seed;
  defense.seed = seed;
  defense.threads = threads;
  attack.seed = seed;
}

void ExperimentConfig::validate() const {
  if (dataset.empty()) throw ConfigError("no dataset given");
  train.validate();
  defense.validate();
  if (attack.budget < 0) throw ConfigError("attack budget must be >= 0");
  if (max_targets == 0) throw ConfigError("max_targets must be positive");
}

json ExperimentConfig::to_json() const {
  return {
      {"dataset", dataset},
      {"seed", seed},
      {"community", community},
      {"max_targets", max_targets},
      {"attack", {{"method", to_string(attack.method)}, {"budget", attack.budget}}},
      {"defense",
       {{"strategy", to_string(defense.strategy)},
        {"temperature", defense.temperature},
        {"protected_label", defense.protected_label ? json(*defense.protected_label) : json(nullptr)},
        {"drop_rate", defense.drop_rate},
        {"training_attack", to_string(defense.training_attack)},
        {"evolving_adversary", defense.evolving_adversary}}},
      {"train",
       {{"epochs", train.epochs},
        {"learning_rate", train.learning_rate},
        {"weight_decay", train.weight_decay},
        {"hidden_dim", train.hidden_dim}}},
  };
}

void ExperimentConfig::merge_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  auto reject_unknown = [](const json& obj, std::initializer_list<const char*> keys, const std::string& where) {
    for (const auto& [k, v] : obj.items())
      if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
        throw ConfigError("unknown config key '" + where + k + "'");
  };
  try {
    reject_unknown(j, {"dataset", "data_root", "seed", "community", "max_targets", "output_dir", "threads",
                       "attack", "defense", "train"},
                   "");
    if (j.contains("dataset")) dataset = j.at("dataset").get<std::string>();
    if (j.contains("data_root")) data_root = j.at("data_root").get<std::string>();
    if (j.contains("seed")) seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("community")) community = j.at("community").get<bool>();
    if (j.contains("max_targets")) max_targets = j.at("max_targets").get<std::size_t>();
    if (j.contains("output_dir")) output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("threads")) threads = j.at("threads").get<unsigned>();
    if (j.contains("attack")) {
      const json& a = j.at("attack");
      reject_unknown(a, {"method", "budget"}, "attack.");
      if (a.contains("method")) attack.method = parse_attack_method(a.at("method").get<std::string>());
      if (a.contains("budget")) attack.budget = a.at("budget").get<int>();
    }
    if (j.contains("defense")) {
      const json& d = j.at("defense");
      reject_unknown(d, {"strategy", "temperature", "protected_label", "drop_rate", "training_attack",
                         "evolving_adversary"},
                     "defense.");
      if (d.contains("strategy")) defense.strategy = parse_defense_strategy(d.at("strategy").get<std::string>());
      if (d.contains("temperature")) defense.temperature = d.at("temperature").get<double>();
      if (d.contains("protected_label")) {
        if (d.at("protected_label").is_null()) defense.protected_label.reset();
        else defense.protected_label = d.at("protected_label").get<int>();
      }
      if (d.contains("drop_rate")) defense.drop_rate = d.at("drop_rate").get<double>();
      if (d.contains("training_attack"))
        defense.training_attack = parse_attack_method(d.at("training_attack").get<std::string>());
      if (d.contains("evolving_adversary")) defense.evolving_adversary = d.at("evolving_adversary").get<bool>();
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      reject_unknown(t, {"epochs", "learning_rate", "weight_decay", "hidden_dim"}, "train.");
      if (t.contains("epochs")) train.epochs = t.at("epochs").get<int>();
      if (t.contains("learning_rate")) train.learning_rate = t.at("learning_rate").get<double>();
      if (t.contains("weight_decay")) train.weight_decay = t.at("weight_decay").get<double>();
      if (t.contains("hidden_dim")) train.hidden_dim = t.at("hidden_dim").get<Index>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
}

ExperimentConfig ExperimentConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config " + path.string() + ": " + e.what());
  }
  ExperimentConfig cfg;
  cfg.merge_json(j);
  return cfg;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump() + "\n" + toolkit_version())));
  return buf;
}

json RunRecord::to_json() const {
  json arts = json::object();
  for (const auto& [k, v] : artifacts) arts[k] = v.generic_string();
  return {{"config_hash", config_hash}, {"toolkit_version", toolkit_version},
          {"started_at", started_at},   {"finished_at", finished_at},
          {"run_dir", run_dir.generic_string()}, {"artifacts", arts}};
}

RunRecord RunRecord::from_json(const json& j) {
  RunRecord r;
  try {
    r.config_hash = j.at("config_hash").get<std::string>();
    r.toolkit_version = j.at("toolkit_version").get<std::string>();
    r.started_at = j.at("started_at").get<std::string>();
    r.finished_at = j.at("finished_at").get<std::string>();
    r.run_dir = j.at("run_dir").get<std::string>();
    for (const auto& [k, v] : j.at("artifacts").items()) r.artifacts[k] = v.get<std::string>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed run record: ") + e.what());
  }
  return r;
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

#define ADVGRAPH_RETHROW(Type) \
  catch (const Type& e) { throw Type(stage + ": " + e.what()); }

[[noreturn]] void rethrow_in_stage(const std::string& stage) {
  try {
    throw;
  }
  ADVGRAPH_RETHROW(InvalidGraph)
  ADVGRAPH_RETHROW(InfeasibleFlip)
  ADVGRAPH_RETHROW(SelfLoop)
  ADVGRAPH_RETHROW(ShapeMismatch)
  ADVGRAPH_RETHROW(DivergedLoss)
  ADVGRAPH_RETHROW(NoFeasibleFlip)
  ADVGRAPH_RETHROW(TooLarge)
  ADVGRAPH_RETHROW(EmptyScope)
  ADVGRAPH_RETHROW(EmptySet)
  ADVGRAPH_RETHROW(UndefinedBaseline)
  ADVGRAPH_RETHROW(NoEdges)
  ADVGRAPH_RETHROW(ParseError)
  ADVGRAPH_RETHROW(CountMismatch)
  ADVGRAPH_RETHROW(IoError)
  ADVGRAPH_RETHROW(DataError)
  ADVGRAPH_RETHROW(ConfigError)
  ADVGRAPH_RETHROW(Error)
  catch (const std::exception& e) {
    throw Error(stage + ": " + e.what());
  }
}

#undef ADVGRAPH_RETHROW

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (...) {
    rethrow_in_stage(name);
  }
}

DefendedModel cached_model(const fs::path& dir, const Graph& g,
                           const std::function<DefendedModel()>& build) {
  if (fs::exists(dir / "defense.json")) return load_defended_model(dir, g);
  DefendedModel m = build();
  save_defended_model(dir, m);
  return m;
}

}  // namespace

RunRecord run_pipeline(ExperimentConfig cfg) {
  cfg.finalize();
  cfg.validate();
  const std::string hash = cfg.hash();

  const fs::path manifest_path = resolve_manifest(cfg.dataset, cfg.data_root);
  const DatasetManifest manifest = stage("load-dataset", [&] { return DatasetManifest::load(manifest_path); });

  RunRecord record;
  record.config_hash = hash;
  record.toolkit_version = toolkit_version();
  record.run_dir = cfg.output_dir / (manifest.name + "-" + hash);
  const fs::path record_path = record.run_dir / "run_record.json";

  if (fs::exists(record_path)) {
    std::ifstream in(record_path);
    try {
      RunRecord cached = RunRecord::from_json(json::parse(in));
      if (cached.config_hash == hash && cached.toolkit_version == record.toolkit_version) {
        cached.cache_hit = true;
        return cached;
      }
    } catch (const std::exception&) {
      // unreadable record: recompute
    }
  }

  record.started_at = utc_now();
  std::error_code ec;
  fs::create_directories(record.run_dir, ec);
  if (ec) throw IoError("cannot create " + record.run_dir.string() + ": " + ec.message());
  {
    std::ofstream out(record.run_dir / "config.json");
    json full = cfg.to_json();
    full["toolkit_version"] = record.toolkit_version;
    out << full.dump(2) << '\n';
  }

  const Dataset ds = stage("load-dataset", [&] { return load_dataset(manifest, cfg.seed); });
  const Graph& g = ds.graph;
  const NodeSplit& split = ds.split;

  DefenseSpec spec = cfg.defense;
  if (spec.strategy == DefenseStrategy::target_at && !spec.protected_label)
    spec.protected_label = majority_train_label(split);
  if (spec.protected_label && *spec.protected_label >= split.num_classes)
    throw ConfigError("protected label " + std::to_string(*spec.protected_label) + " not in dataset " +
                      manifest.name);

  EvalOptions options;
  options.max_targets = cfg.max_targets;
  options.seed = cfg.seed;
  options.threads = cfg.threads;
  options.protected_label = spec.protected_label;

  auto evaluate = [&](const ModelParams& model) {
    return cfg.community ? community_attack_eval(model, g, split, cfg.attack, options, cfg.seed)
                         : evaluate_attack(model, g, split, cfg.attack, options);
  };

  const fs::path undefended_dir = record.run_dir / "undefended";
  const DefendedModel undefended = stage("train-undefended", [&] {
    return cached_model(undefended_dir, g, [&] { return train_undefended(g, split, cfg.train); });
  });
  record.artifacts["undefended_model"] = undefended_dir / "model.ckpt";

  std::vector<EvalReport> reports;
  reports.push_back(stage("evaluate-undefended", [&] { return evaluate(undefended.params); }));
  reports.back().defense = "none";

  if (spec.strategy != DefenseStrategy::none) {
    const fs::path defense_dir = record.run_dir / "defense";
    const DefendedModel defended = stage("build-defense", [&] {
      return cached_model(defense_dir, g, [&] { return build_defense(g, split, cfg.train, spec); });
    });
    record.artifacts["defended_model"] = defense_dir / "model.ckpt";
    record.artifacts["training_graph"] = defense_dir / "training_graph.edges";

    EvalReport defended_report = stage("evaluate-defended", [&] { return evaluate(defended.params); });
    defended_report.defense = to_string(spec.strategy);
    try {
      defended_report.pair_with_baseline(reports.front());
    } catch (const UndefinedBaseline& e) {
      defended_report.config["adr_note"] = e.what();
    }
    reports.push_back(std::move(defended_report));
  }

  json resolved = cfg.to_json();
  resolved["toolkit_version"] = record.toolkit_version;
  resolved["defense"]["protected_label"] = spec.protected_label ? json(*spec.protected_label) : json(nullptr);
  resolved["split_sizes"] = {split.train.size(), split.val.size(), split.test.size()};
  for (auto& r : reports) {
    json evaluation = r.config;
    r.config = resolved;
    r.config["evaluation"] = evaluation;
  }

  const ReportFiles files = stage("emit-report", [&] { return emit_report(reports, record.run_dir / "report"); });
  record.artifacts["table"] = files.table;
  record.artifacts["report"] = files.dump;
  for (std::size_t i = 0; i < files.plots.size(); ++i)
    record.artifacts["plot_" + std::to_string(i)] = files.plots[i];

  record.finished_at = utc_now();
  std::ofstream out(record_path);
  out << record.to_json().dump(2) << '\n';
  if (!out) throw IoError("cannot write " + record_path.string());
  return record;
}

}  // namespace advgraph
