#pragma once

#include "advgraph/attack.hpp"
#include "advgraph/defense.hpp"
#include "advgraph/gcn.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace advgraph {

/// Everything a pipeline run depends on. One seed drives the split, training,
/// defense construction, attacks, target sampling and Louvain.
struct ExperimentConfig {
  std::string dataset;                         ///< name, directory or manifest path
  std::filesystem::path data_root = "data";
  DefenseSpec defense;
  AttackConfig attack;
  TrainConfig train;
  std::size_t max_targets = 500;
  bool community = false;                      ///< score with Louvain instead of the GCN
  std::filesystem::path output_dir = "runs";
  std::uint64_t seed = 0;
  unsigned threads = 0;

  /// Propagates seed into the nested configs and checks cross-field rules.
  void finalize();
  void validate() const;

  /// Canonical form; output_dir and threads are left out because they do not
  /// affect results.
  nlohmann::json to_json() const;
  /// Overlays the keys of j onto *this. Unknown keys raise ConfigError.
  void merge_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::filesystem::path& path);

  /// FNV-1a 64 of the canonical JSON and the toolkit version, as 16 hex digits.
  std::string hash() const;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view data);

struct RunRecord {
  std::string config_hash;
  std::string toolkit_version;
  std::string started_at;   ///< UTC, ISO 8601
  std::string finished_at;
  std::filesystem::path run_dir;
  std::map<std::string, std::filesystem::path> artifacts;
  bool cache_hit = false;

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& j);
};

/// train-undefended -> evaluate-undefended -> build-defense -> evaluate-defended
/// -> emit-report, persisted under output_dir/<dataset>-<hash>. A run whose
/// record carries the same hash and toolkit version is returned as a cache hit.
/// Stage failures are rethrown as the same error kind with the stage name prefixed.
RunRecord run_pipeline(ExperimentConfig cfg);

}  // namespace advgraph
