#pragma once

#include "advgraph/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace advgraph {

/// community[i] is the community id of node i; ids are contiguous from 0 and
/// numbered by first appearance in node order.
using Partition = std::vector<int>;

struct LouvainResult {
  Partition partition;
  double modularity = 0.0;
  /// Modularity after each level (non-decreasing).
  std::vector<double> history;
};

/// Q = sum_c (e_c / m - (d_c / 2m)^2). Throws NoEdges on an edgeless graph.
double modularity(const Graph& g, const Partition& partition);

/// Louvain local moving plus aggregation. The node visiting order of each level
/// is a shuffle driven by seed. An edgeless graph yields singletons and Q = 0.
LouvainResult louvain(const Graph& g, std::uint64_t seed = 0);

/// Renumbers community ids by first appearance.
Partition canonical_partition(const Partition& partition);

/// Fraction of peers that share target's community.
double peer_agreement(const Partition& partition, Index target, std::span<const Index> peers);

/// Target qualifies when at least half of its peers share its community.
bool deception_eligible(const Partition& before, Index target, std::span<const Index> peers);

/// Eligible target whose peer agreement drops below one half after the attack.
bool deception_success(const Partition& before, const Partition& after, Index target,
                       std::span<const Index> peers);

/// Nodes sharing target's ground-truth label, target excluded.
std::vector<Index> label_peers(const std::vector<int>& labels, Index target);

/// Change of modularity when communities a and b are merged.
double modularity_merge_delta(const Graph& g, const Partition& partition, int a, int b);

/// Plain-text "node community" lines.
void save_partition(const std::filesystem::path& path, const Partition& partition);
Partition load_partition(const std::filesystem::path& path);

}  // namespace advgraph
