#include "advgraph/community.hpp"

#include "advgraph/errors.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace advgraph {

namespace {

struct Community {
  double internal = 0.0;  // edges inside
  double degree = 0.0;    // sum of member degrees
};

std::vector<Community> community_sums(const Graph& g, const Partition& partition) {
  if (static_cast<Index>(partition.size()) != g.num_nodes())
    throw ShapeMismatch("partition length differs from node count");
  const int k = partition.empty() ? 0 : *std::max_element(partition.begin(), partition.end()) + 1;
  std::vector<Community> out(static_cast<std::size_t>(std::max(k, 0)));
  for (const auto& [i, j] : g.edge_list()) {
    const int ci = partition[static_cast<std::size_t>(i)];
    const int cj = partition[static_cast<std::size_t>(j)];
    out[static_cast<std::size_t>(ci)].degree += 1.0;
    out[static_cast<std::size_t>(cj)].degree += 1.0;
    if (ci == cj) out[static_cast<std::size_t>(ci)].internal += 1.0;
  }
  return out;
}

/// Weighted graph of one Louvain level. Self-loop weight counts both ends.
struct Level {
  std::vector<std::vector<std::pair<int, double>>> adj;
  std::vector<double> self;
  std::vector<double> strength;
  double two_m = 0.0;

  int size() const { return static_cast<int>(adj.size()); }
};

Level level_from_graph(const Graph& g) {
  Level lv;
  const auto n = static_cast<std::size_t>(g.num_nodes());
  lv.adj.resize(n);
  lv.self.assign(n, 0.0);
  lv.strength.assign(n, 0.0);
  for (const auto& [i, j] : g.edge_list()) {
    lv.adj[static_cast<std::size_t>(i)].push_back({static_cast<int>(j), 1.0});
    lv.adj[static_cast<std::size_t>(j)].push_back({static_cast<int>(i), 1.0});
    lv.strength[static_cast<std::size_t>(i)] += 1.0;
    lv.strength[static_cast<std::size_t>(j)] += 1.0;
  }
  lv.two_m = 2.0 * static_cast<double>(g.num_edges());
  return lv;
}

double level_modularity(const Level& lv, const std::vector<int>& comm) {
  std::vector<double> in(static_cast<std::size_t>(lv.size()), 0.0), tot(in.size(), 0.0);
  for (int i = 0; i < lv.size(); ++i) {
    const auto ci = static_cast<std::size_t>(comm[static_cast<std::size_t>(i)]);
    tot[ci] += lv.strength[static_cast<std::size_t>(i)];
    in[ci] += lv.self[static_cast<std::size_t>(i)];
    for (const auto& [j, w] : lv.adj[static_cast<std::size_t>(i)])
      if (comm[static_cast<std::size_t>(j)] == static_cast<int>(ci)) in[ci] += w;
  }
  double q = 0.0;
  for (std::size_t c = 0; c < in.size(); ++c)
    q += in[c] / lv.two_m - (tot[c] / lv.two_m) * (tot[c] / lv.two_m);
  return q;
}

/// Local moving phase; returns true if any node changed community.
bool local_moving(const Level& lv, std::vector<int>& comm, std::mt19937_64& rng) {
  const int n = lv.size();
  std::vector<double> tot(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i)
    tot[static_cast<std::size_t>(comm[static_cast<std::size_t>(i)])] += lv.strength[static_cast<std::size_t>(i)];

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<double> link(static_cast<std::size_t>(n), 0.0);
  std::vector<int> touched;
  bool any_move = false;
  for (bool moved = true; moved;) {
    moved = false;
    for (int i : order) {
      const auto ui = static_cast<std::size_t>(i);
      const int own = comm[ui];
      const double k = lv.strength[ui];
      touched.clear();
      touched.push_back(own);
      link[static_cast<std::size_t>(own)] = 0.0;
      for (const auto& [j, w] : lv.adj[ui]) {
        const int c = comm[static_cast<std::size_t>(j)];
        if (link[static_cast<std::size_t>(c)] == 0.0 &&
            std::find(touched.begin(), touched.end(), c) == touched.end())
          touched.push_back(c);
        link[static_cast<std::size_t>(c)] += w;
      }
      tot[static_cast<std::size_t>(own)] -= k;
      int best = own;
      double best_gain = link[static_cast<std::size_t>(own)] - tot[static_cast<std::size_t>(own)] * k / lv.two_m;
      for (int c : touched) {
        const double gain = link[static_cast<std::size_t>(c)] - tot[static_cast<std::size_t>(c)] * k / lv.two_m;
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best = c;
        }
      }
      tot[static_cast<std::size_t>(best)] += k;
      for (int c : touched) link[static_cast<std::size_t>(c)] = 0.0;
      if (best != own) {
        comm[ui] = best;
        moved = true;
        any_move = true;
      }
    }
  }
  return any_move;
}

Level aggregate(const Level& lv, const std::vector<int>& comm, int k) {
  Level out;
  out.adj.resize(static_cast<std::size_t>(k));
  out.self.assign(static_cast<std::size_t>(k), 0.0);
  out.strength.assign(static_cast<std::size_t>(k), 0.0);
  out.two_m = lv.two_m;
  std::vector<std::unordered_map<int, double>> w(static_cast<std::size_t>(k));
  for (int i = 0; i < lv.size(); ++i) {
    const auto ci = static_cast<std::size_t>(comm[static_cast<std::size_t>(i)]);
    out.strength[ci] += lv.strength[static_cast<std::size_t>(i)];
    out.self[ci] += lv.self[static_cast<std::size_t>(i)];
    for (const auto& [j, wt] : lv.adj[static_cast<std::size_t>(i)]) {
      const int cj = comm[static_cast<std::size_t>(j)];
      if (cj == static_cast<int>(ci)) out.self[ci] += wt;
      else w[ci][cj] += wt;
    }
  }
  for (std::size_t c = 0; c < w.size(); ++c) {
    out.adj[c].assign(w[c].begin(), w[c].end());
    std::sort(out.adj[c].begin(), out.adj[c].end());
  }
  return out;
}

}  // namespace

Partition canonical_partition(const Partition& partition) {
  std::unordered_map<int, int> ids;
  Partition out(partition.size());
  for (std::size_t i = 0; i < partition.size(); ++i) {
    const auto [it, fresh] = ids.try_emplace(partition[i], static_cast<int>(ids.size()));
    out[i] = it->second;
  }
  return out;
}

double modularity(const Graph& g, const Partition& partition) {
  if (g.num_edges() == 0) throw NoEdges("modularity of a graph without edges");
  const double m = static_cast<double>(g.num_edges());
  double q = 0.0;
  for (const auto& c : community_sums(g, partition))
    q += c.internal / m - (c.degree / (2.0 * m)) * (c.degree / (2.0 * m));
  return q;
}

double modularity_merge_delta(const Graph& g, const Partition& partition, int a, int b) {
  if (g.num_edges() == 0) throw NoEdges("modularity of a graph without edges");
  const double m = static_cast<double>(g.num_edges());
  const auto sums = community_sums(g, partition);
  double between = 0.0;
  for (const auto& [i, j] : g.edge_list()) {
    const int ci = partition[static_cast<std::size_t>(i)];
    const int cj = partition[static_cast<std::size_t>(j)];
    if ((ci == a && cj == b) || (ci == b && cj == a)) between += 1.0;
  }
  return between / m - sums[static_cast<std::size_t>(a)].degree *
                           sums[static_cast<std::size_t>(b)].degree / (2.0 * m * m);
}

LouvainResult louvain(const Graph& g, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(g.num_nodes());
  LouvainResult out;
  out.partition.resize(n);
  std::iota(out.partition.begin(), out.partition.end(), 0);
  if (g.num_edges() == 0) {
    out.history.push_back(0.0);
    return out;
  }

  std::mt19937_64 rng(seed);
  Level lv = level_from_graph(g);
  std::vector<int> node_comm = out.partition;  // original node -> level node
  double q = level_modularity(lv, out.partition);
  out.history.push_back(q);
  for (;;) {
    std::vector<int> comm(static_cast<std::size_t>(lv.size()));
    std::iota(comm.begin(), comm.end(), 0);
    if (!local_moving(lv, comm, rng)) break;
    const double next = level_modularity(lv, comm);
    if (!(next > q + 1e-9)) break;

    const Partition renum = canonical_partition(comm);
    const int k = *std::max_element(renum.begin(), renum.end()) + 1;
    for (auto& c : node_comm) c = renum[static_cast<std::size_t>(c)];
    lv = aggregate(lv, renum, k);
    q = next;
    out.history.push_back(q);
  }
  out.partition = canonical_partition(node_comm);
  out.modularity = modularity(g, out.partition);
  return out;
}

double peer_agreement(const Partition& partition, Index target, std::span<const Index> peers) {
  if (peers.empty()) return 0.0;
  const int own = partition[static_cast<std::size_t>(target)];
  std::size_t same = 0;
  for (Index p : peers)
    if (partition[static_cast<std::size_t>(p)] == own) ++same;
  return static_cast<double>(same) / static_cast<double>(peers.size());
}

bool deception_eligible(const Partition& before, Index target, std::span<const Index> peers) {
  return !peers.empty() && peer_agreement(before, target, peers) >= 0.5;
}

bool deception_success(const Partition& before, const Partition& after, Index target,
                       std::span<const Index> peers) {
  return deception_eligible(before, target, peers) && peer_agreement(after, target, peers) < 0.5;
}

std::vector<Index> label_peers(const std::vector<int>& labels, Index target) {
  std::vector<Index> out;
  const int own = labels[static_cast<std::size_t>(target)];
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == own && static_cast<Index>(i) != target) out.push_back(static_cast<Index>(i));
  return out;
}

void save_partition(const std::filesystem::path& path, const Partition& partition) {
  std::ofstream out(path);
  for (std::size_t i = 0; i < partition.size(); ++i) out << i << ' ' << partition[i] << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

Partition load_partition(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::vector<std::pair<long long, int>> rows;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    long long node = 0;
    int comm = 0;
    if (!(ss >> node >> comm) || node < 0 || comm < 0)
      throw ParseError(path.string() + ":" + std::to_string(number) + ": expected 'node community'");
    rows.emplace_back(node, comm);
  }
  Partition out(rows.size(), -1);
  for (const auto& [node, comm] : rows) {
    if (node >= static_cast<long long>(rows.size()) || out[static_cast<std::size_t>(node)] != -1)
      throw ParseError(path.string() + ": node ids must be 0..n-1, each listed once");
    out[static_cast<std::size_t>(node)] = comm;
  }
  return out;
}

}  // namespace advgraph
