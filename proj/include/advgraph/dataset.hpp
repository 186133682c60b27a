#pragma once

#include "advgraph/graph.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace advgraph {

/// Describes one dataset directory. Paths are relative to the manifest file.
struct DatasetManifest {
  std::string name;
  std::filesystem::path edges;
  std::filesystem::path labels;
  std::optional<std::filesystem::path> features;
  std::optional<std::filesystem::path> split;
  Index expected_nodes = 0;
  Index expected_edges = 0;  ///< edge records in the edge file, before deduplication
  int expected_classes = 0;
  std::array<std::size_t, 3> split_sizes{};  ///< train, val, test
  bool normalize_features = true;            ///< L1-normalize feature rows

  /// Parses manifest.json (ConfigError on missing keys, IoError when unreadable).
  static DatasetManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct LoadStats {
  std::size_t edge_records = 0;
  std::size_t self_loops = 0;  ///< dropped with a warning
  std::size_t duplicates = 0;  ///< repeated or reversed pairs collapsed
};

struct Dataset {
  Graph graph;
  NodeSplit split;
  std::vector<std::string> node_ids;     ///< original id of each internal node
  std::vector<std::string> class_names;  ///< label string of each class id
  LoadStats stats;
};

/// Reads edges ("u v"), labels ("id label"), optional features ("id idx:val ...")
/// and optional split. Node order follows the label file; classes are numbered
/// in first-seen order. Without a split file a class-stratified split of
/// manifest.split_sizes is drawn from split_seed.
/// Throws ParseError (with file and line), CountMismatch, IoError.
Dataset load_dataset(const DatasetManifest& manifest, std::uint64_t split_seed = 0);
Dataset load_dataset(const std::filesystem::path& manifest_path, std::uint64_t split_seed = 0);

/// Writes a self-contained copy (edges, labels, features, split, manifest.json)
/// that load_dataset reads back to the same graph and split.
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Class-stratified train/val/test split with exactly the requested sizes.
/// Each set receives per-class quotas proportional to the remaining class
/// counts (largest remainder), and every class gets a training node when
/// sizes[0] is at least the class count. Sets are sorted ascending.
NodeSplit stratified_split(const std::vector<int>& labels, int num_classes,
                           std::array<std::size_t, 3> sizes, std::uint64_t seed);

/// Resolves a --dataset argument: a manifest path, a dataset directory, or a
/// name looked up under data_root.
std::filesystem::path resolve_manifest(const std::string& dataset,
                                       const std::filesystem::path& data_root);

}  // namespace advgraph
