// advgraph command-line front end.
#include "advgraph/dataset.hpp"
#include "advgraph/defense.hpp"
#include "advgraph/errors.hpp"
#include "advgraph/evaluation.hpp"
#include "advgraph/pipeline.hpp"
#include "advgraph/report.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace advgraph;
using nlohmann::json;

namespace {

struct Flags {
  std::string dataset;
  std::string data_root = "data";
  std::string defense = "none";
  std::string attack = "fga";
  int budget = 1;
  double temperature = 10.0;
  std::optional<int> target_label;
  double drop_rate = 0.1;
  std::uint64_t seed = 0;
  std::string out;
  std::string config;
  std::size_t max_targets = 500;
  unsigned threads = 0;
  std::string model_dir;
  std::vector<std::string> inputs;
};

void add_shared(CLI::App* cmd, Flags& f) {
  cmd->add_option("--dataset", f.dataset, "dataset name, directory or manifest.json");
  cmd->add_option("--data-root", f.data_root, "directory holding <name>/manifest.json")->capture_default_str();
  cmd->add_option("--defense", f.defense, "defense strategy")
      ->check(CLI::IsMember({"none", "at", "global-at", "target-at", "sd", "scel", "ensemble"}))
      ->capture_default_str();
  cmd->add_option("--attack", f.attack, "attack method")
      ->check(CLI::IsMember({"fga", "nettack", "random"}))
      ->capture_default_str();
  cmd->add_option("--budget", f.budget, "link flips per target")->check(CLI::NonNegativeNumber)->capture_default_str();
  cmd->add_option("--temperature", f.temperature, "distillation temperature")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  cmd->add_option("--target-label", f.target_label, "protected label for target-at");
  cmd->add_option("--drop-rate", f.drop_rate, "edge drop rate for at")->check(CLI::Range(0.0, 0.999))->capture_default_str();
  cmd->add_option("--seed", f.seed, "random seed")->capture_default_str();
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--config", f.config, "JSON config; its values override flags")->check(CLI::ExistingFile);
  cmd->add_option("--max-targets", f.max_targets, "cap on evaluated targets")->capture_default_str();
  cmd->add_option("--threads", f.threads, "worker threads (0 = auto)");
}

ExperimentConfig to_config(const Flags& f, const std::string& default_out) {
  ExperimentConfig cfg;
  cfg.dataset = f.dataset;
  cfg.data_root = f.data_root;
  cfg.defense.strategy = parse_defense_strategy(f.defense);
  cfg.defense.temperature = f.temperature;
  cfg.defense.protected_label = f.target_label;
  cfg.defense.drop_rate = f.drop_rate;
  cfg.attack.method = parse_attack_method(f.attack);
  if (cfg.attack.method != AttackMethod::random) cfg.defense.training_attack = cfg.attack.method;
  cfg.attack.budget = f.budget;
  cfg.seed = f.seed;
  cfg.max_targets = f.max_targets;
  cfg.threads = f.threads;
  cfg.output_dir = f.out.empty() ? default_out : f.out;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("malformed config " + f.config + ": " + e.what());
    }
    cfg.merge_json(j);
  }
  cfg.finalize();
  cfg.validate();
  return cfg;
}

Dataset load(const ExperimentConfig& cfg) {
  return load_dataset(resolve_manifest(cfg.dataset, cfg.data_root), cfg.seed);
}

void print_json(const json& j) { std::cout << j.dump(2) << '\n'; }

int cmd_train(const ExperimentConfig& cfg) {
  const Dataset ds = load(cfg);
  const DefendedModel m = train_undefended(ds.graph, ds.split, cfg.train);
  save_defended_model(cfg.output_dir, m);
  print_json({{"dataset", ds.graph.name()},
              {"train_accuracy", m.train_accuracy},
              {"val_accuracy", m.val_accuracy},
              {"test_accuracy", accuracy(m.params, ds.graph, ds.split, ds.split.test)},
              {"model", (cfg.output_dir / "model.ckpt").generic_string()}});
  return 0;
}

int cmd_defend(const ExperimentConfig& cfg) {
  const Dataset ds = load(cfg);
  DefenseSpec spec = cfg.defense;
  if (spec.strategy == DefenseStrategy::target_at && !spec.protected_label)
    spec.protected_label = majority_train_label(ds.split);
  const DefendedModel m = build_defense(ds.graph, ds.split, cfg.train, spec);
  save_defended_model(cfg.output_dir, m);
  print_json({{"dataset", ds.graph.name()},
              {"defense", to_string(spec.strategy)},
              {"protected_label", spec.protected_label ? json(*spec.protected_label) : json(nullptr)},
              {"applied_flips", m.applied.size()},
              {"skipped_flips", m.skipped.size()},
              {"train_accuracy", m.train_accuracy},
              {"test_accuracy", accuracy(m.params, ds.graph, ds.split, ds.split.test)},
              {"model_dir", cfg.output_dir.generic_string()}});
  return 0;
}

int cmd_attack(const ExperimentConfig& cfg, const std::string& model_dir) {
  const Dataset ds = load(cfg);
  const DefendedModel m = model_dir.empty() ? train_undefended(ds.graph, ds.split, cfg.train)
                                            : load_defended_model(model_dir, ds.graph);
  EvalOptions options;
  options.max_targets = cfg.max_targets;
  options.seed = cfg.seed;
  options.threads = cfg.threads;
  options.protected_label = cfg.defense.protected_label;
  EvalReport r = evaluate_attack(m.params, ds.graph, ds.split, cfg.attack, options);
  r.defense = to_string(m.spec.strategy);
  const EvalReport reports[] = {r};
  emit_report(reports, cfg.output_dir);
  print_json({{"dataset", r.dataset},
              {"attack", r.attack},
              {"population", r.population},
              {"targets_evaluated", r.records.size()},
              {"asr", r.asr},
              {"acd", r.acd ? json(*r.acd) : json(nullptr)}});
  return 0;
}

int cmd_pipeline(ExperimentConfig cfg, bool community) {
  cfg.community = community || cfg.community;
  const RunRecord rec = run_pipeline(cfg);
  const auto reports = load_report_dump(rec.artifacts.at("report"));
  json summary = json::array();
  for (const auto& r : reports) {
    summary.push_back({{"defense", r.defense},
                       {"detector", r.detector},
                       {"population", r.population},
                       {"targets_evaluated", r.records.size()},
                       {"asr", r.asr},
                       {"adr", r.adr ? json(*r.adr) : json(nullptr)},
                       {"acd", r.acd ? json(*r.acd) : json(nullptr)}});
  }
  print_json({{"run_dir", rec.run_dir.generic_string()},
              {"config_hash", rec.config_hash},
              {"cache_hit", rec.cache_hit},
              {"reports", summary}});
  return 0;
}

int cmd_report(const std::vector<std::string>& inputs, const fs::path& out) {
  if (inputs.empty()) throw ConfigError("report needs at least one --input report.json");
  std::vector<EvalReport> all;
  for (const auto& in : inputs) {
    auto rs = load_report_dump(in);
    all.insert(all.end(), rs.begin(), rs.end());
  }
  const ReportFiles files = emit_report(all, out);
  std::cout << report_table(all);
  std::cerr << "wrote " << files.table.string() << " and " << files.dump.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacks and defenses for graph convolutional networks"};
  app.set_version_flag("--version", toolkit_version());
  app.require_subcommand(1);
  Flags f;

  auto* train = app.add_subcommand("train", "train an undefended GCN");
  auto* attack = app.add_subcommand("attack", "attack a trained model and report ASR/ACD");
  auto* defend = app.add_subcommand("defend", "build a defended model");
  auto* evaluate = app.add_subcommand("evaluate", "full pipeline: baseline, defense, ADR");
  auto* community = app.add_subcommand("community", "community deception evaluation with Louvain");
  auto* report = app.add_subcommand("report", "merge report dumps into tables and plot data");
  for (auto* cmd : {train, attack, defend, evaluate, community, report}) add_shared(cmd, f);
  attack->add_option("--model", f.model_dir, "model directory from train/defend (default: train one)")
      ->check(CLI::ExistingDirectory);
  report->add_option("--input", f.inputs, "report.json files")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (report->parsed()) return cmd_report(f.inputs, f.out.empty() ? "report" : f.out);
    if (f.dataset.empty() && f.config.empty()) {
      std::cerr << "error: --dataset is required\n";
      return 1;
    }
    if (train->parsed()) return cmd_train(to_config(f, "model"));
    if (defend->parsed()) return cmd_defend(to_config(f, "defended"));
    if (attack->parsed()) return cmd_attack(to_config(f, "attack"), f.model_dir);
    if (evaluate->parsed()) return cmd_pipeline(to_config(f, "runs"), false);
    if (community->parsed()) return cmd_pipeline(to_config(f, "runs"), true);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
