#include "advgraph/dataset.hpp"

#include "advgraph/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <unordered_map>

namespace advgraph {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  return in;
}

bool blank_or_comment(const std::string& line) {
  const auto pos = line.find_first_not_of(" \t\r");
  return pos == std::string::npos || line[pos] == '#';
}

[[noreturn]] void parse_fail(const fs::path& path, std::size_t line, const std::string& what) {
  throw ParseError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw ConfigError("split ids must be strings or integers");
}

}  // namespace

DatasetManifest DatasetManifest::load(const fs::path& path) {
  std::ifstream in = open_input(path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed manifest " + path.string() + ": " + e.what());
  }
  const fs::path dir = path.parent_path();
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.edges = dir / j.at("edges").get<std::string>();
    m.labels = dir / j.at("labels").get<std::string>();
    if (j.contains("features")) m.features = dir / j.at("features").get<std::string>();
    if (j.contains("split")) m.split = dir / j.at("split").get<std::string>();
    m.expected_nodes = j.at("expected_nodes").get<Index>();
    m.expected_edges = j.at("expected_edges").get<Index>();
    m.expected_classes = j.at("expected_classes").get<int>();
    const auto sizes = j.at("split_sizes").get<std::vector<std::size_t>>();
    if (sizes.size() != 3) throw ConfigError("split_sizes needs three entries");
    std::copy(sizes.begin(), sizes.end(), m.split_sizes.begin());
    m.normalize_features = j.value("normalize_features", true);
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
  return m;
}

void DatasetManifest::save(const fs::path& path) const {
  const fs::path dir = path.parent_path();
  auto rel = [&](const fs::path& p) { return p.lexically_relative(dir).generic_string(); };
  json j = {{"name", name},
            {"edges", rel(edges)},
            {"labels", rel(labels)},
            {"expected_nodes", expected_nodes},
            {"expected_edges", expected_edges},
            {"expected_classes", expected_classes},
            {"split_sizes", split_sizes},
            {"normalize_features", normalize_features}};
  if (features) j["features"] = rel(*features);
  if (split) j["split"] = rel(*split);
  std::ofstream out(path);
  out << j.dump(2) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

NodeSplit stratified_split(const std::vector<int>& labels, int num_classes,
                           std::array<std::size_t, 3> sizes, std::uint64_t seed) {
  const std::size_t n = labels.size();
  if (sizes[0] + sizes[1] + sizes[2] > n)
    throw ConfigError("split sizes exceed the node count");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Index>> pool(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < n; ++i) pool[static_cast<std::size_t>(labels[i])].push_back(static_cast<Index>(i));
  for (auto& p : pool) std::shuffle(p.begin(), p.end(), rng);

  std::vector<std::size_t> cursor(pool.size(), 0);
  std::array<std::vector<Index>, 3> sets;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::size_t k = sizes[s];
    std::vector<std::size_t> remaining(pool.size());
    std::size_t total = 0;
    for (std::size_t c = 0; c < pool.size(); ++c) {
      remaining[c] = pool[c].size() - cursor[c];
      total += remaining[c];
    }
    std::vector<std::size_t> quota(pool.size(), 0);
    if (total > 0) {
      std::vector<std::pair<double, std::size_t>> frac;
      std::size_t assigned = 0;
      for (std::size_t c = 0; c < pool.size(); ++c) {
        const double exact = static_cast<double>(k) * static_cast<double>(remaining[c]) /
                             static_cast<double>(total);
        quota[c] = static_cast<std::size_t>(exact);
        assigned += quota[c];
        frac.push_back({exact - static_cast<double>(quota[c]), c});
      }
      std::stable_sort(frac.begin(), frac.end(),
                       [](const auto& a, const auto& b) { return a.first > b.first; });
      for (std::size_t r = 0; assigned < k; r = (r + 1) % frac.size()) {
        const std::size_t c = frac[r].second;
        if (quota[c] < remaining[c]) {
          ++quota[c];
          ++assigned;
        }
      }
      if (s == 0 && k >= pool.size()) {
        for (std::size_t c = 0; c < pool.size(); ++c) {
          if (quota[c] > 0 || remaining[c] == 0) continue;
          const auto donor = std::max_element(quota.begin(), quota.end()) - quota.begin();
          --quota[static_cast<std::size_t>(donor)];
          ++quota[c];
        }
      }
    }
    for (std::size_t c = 0; c < pool.size(); ++c)
      for (std::size_t q = 0; q < quota[c]; ++q) sets[s].push_back(pool[c][cursor[c]++]);
    std::sort(sets[s].begin(), sets[s].end());
  }

  NodeSplit split;
  split.labels = labels;
  split.num_classes = num_classes;
  split.train = std::move(sets[0]);
  split.val = std::move(sets[1]);
  split.test = std::move(sets[2]);
  return split;
}

Dataset load_dataset(const DatasetManifest& m, std::uint64_t split_seed) {
  Dataset ds;
  std::unordered_map<std::string, Index> index;
  std::map<std::string, int> class_index;
  std::vector<int> labels;

  {
    std::ifstream in = open_input(m.labels);
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
      if (blank_or_comment(line)) continue;
      std::istringstream ss(line);
      std::string id, label, extra;
      if (!(ss >> id >> label) || (ss >> extra)) parse_fail(m.labels, number, "expected 'node_id label'");
      if (index.count(id)) parse_fail(m.labels, number, "node '" + id + "' labelled twice");
      auto [it, fresh] = class_index.try_emplace(label, static_cast<int>(ds.class_names.size()));
      if (fresh) ds.class_names.push_back(label);
      index.emplace(id, static_cast<Index>(ds.node_ids.size()));
      ds.node_ids.push_back(id);
      labels.push_back(it->second);
    }
  }
  const Index n = static_cast<Index>(ds.node_ids.size());

  EdgeList edges;
  {
    std::ifstream in = open_input(m.edges);
    std::set<std::pair<Index, Index>> seen;
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
      if (blank_or_comment(line)) continue;
      std::istringstream ss(line);
      std::string u, v, extra;
      if (!(ss >> u >> v) || (ss >> extra)) parse_fail(m.edges, number, "expected 'u v'");
      const auto iu = index.find(u), iv = index.find(v);
      if (iu == index.end()) parse_fail(m.edges, number, "node '" + u + "' has no label");
      if (iv == index.end()) parse_fail(m.edges, number, "node '" + v + "' has no label");
      ++ds.stats.edge_records;
      if (iu->second == iv->second) {
        ++ds.stats.self_loops;
        continue;
      }
      const auto key = std::minmax(iu->second, iv->second);
      if (!seen.insert(key).second) {
        ++ds.stats.duplicates;
        continue;
      }
      edges.emplace_back(key.first, key.second);
    }
  }
  if (ds.stats.self_loops > 0)
    std::fprintf(stderr, "warning: %s: dropped %zu self-loop(s)\n", m.name.c_str(), ds.stats.self_loops);

  std::shared_ptr<const SparseMatrix> features;
  if (m.features) {
    std::ifstream in = open_input(*m.features);
    std::vector<Eigen::Triplet<double>> triplets;
    Index dim = 0;
    std::string line;
    for (std::size_t number = 1; std::getline(in, line); ++number) {
      if (blank_or_comment(line)) continue;
      std::istringstream ss(line);
      std::string id, entry;
      ss >> id;
      const auto it = index.find(id);
      if (it == index.end()) parse_fail(*m.features, number, "node '" + id + "' has no label");
      while (ss >> entry) {
        const auto colon = entry.find(':');
        if (colon == std::string::npos) parse_fail(*m.features, number, "expected idx:val, got '" + entry + "'");
        try {
          std::size_t used = 0;
          const long long col = std::stoll(entry.substr(0, colon), &used);
          if (used != colon || col < 0) throw std::invalid_argument("index");
          const double val = std::stod(entry.substr(colon + 1));
          triplets.emplace_back(it->second, static_cast<Index>(col), val);
          dim = std::max(dim, static_cast<Index>(col) + 1);
        } catch (const std::logic_error&) {
          parse_fail(*m.features, number, "bad feature entry '" + entry + "'");
        }
      }
    }
    auto x = std::make_shared<SparseMatrix>(n, dim);
    x->setFromTriplets(triplets.begin(), triplets.end());
    if (m.normalize_features) {
      for (Index r = 0; r < x->outerSize(); ++r) {
        double sum = 0.0;
        for (SparseMatrix::InnerIterator e(*x, r); e; ++e) sum += std::abs(e.value());
        if (sum > 0.0)
          for (SparseMatrix::InnerIterator e(*x, r); e; ++e) e.valueRef() /= sum;
      }
    }
    features = std::move(x);
  }

  if (n != m.expected_nodes)
    throw CountMismatch(m.name + ": expected " + std::to_string(m.expected_nodes) + " nodes, found " +
                        std::to_string(n));
  if (static_cast<Index>(ds.stats.edge_records) != m.expected_edges)
    throw CountMismatch(m.name + ": expected " + std::to_string(m.expected_edges) +
                        " edge records, found " + std::to_string(ds.stats.edge_records));
  if (static_cast<int>(ds.class_names.size()) != m.expected_classes)
    throw CountMismatch(m.name + ": expected " + std::to_string(m.expected_classes) +
                        " classes, found " + std::to_string(ds.class_names.size()));

  ds.graph = Graph::from_edges(m.name, n, edges, features);
  const int num_classes = static_cast<int>(ds.class_names.size());

  if (m.split) {
    std::ifstream in = open_input(*m.split);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ParseError(m.split->string() + ": " + e.what());
    }
    ds.split.labels = labels;
    ds.split.num_classes = num_classes;
    auto read_set = [&](const char* key, std::vector<Index>& out) {
      if (!j.contains(key)) throw ParseError(m.split->string() + ": missing '" + key + "'");
      for (const auto& v : j.at(key)) {
        const auto it = index.find(id_string(v));
        if (it == index.end()) throw ParseError(m.split->string() + ": unknown node " + v.dump());
        out.push_back(it->second);
      }
    };
    read_set("train", ds.split.train);
    read_set("val", ds.split.val);
    read_set("test", ds.split.test);
    const std::array<std::size_t, 3> got{ds.split.train.size(), ds.split.val.size(), ds.split.test.size()};
    if (got != m.split_sizes)
      throw CountMismatch(m.name + ": split file sizes differ from split_sizes");
  } else {
    ds.split = stratified_split(labels, num_classes, m.split_sizes, split_seed);
  }
  ds.split.validate(n);
  return ds;
}

Dataset load_dataset(const fs::path& manifest_path, std::uint64_t split_seed) {
  return load_dataset(DatasetManifest::load(manifest_path), split_seed);
}

void save_dataset(const fs::path& dir, const Dataset& ds) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  const std::string name = ds.graph.name();
  DatasetManifest m;
  m.name = name;
  m.edges = dir / (name + ".edges");
  m.labels = dir / (name + ".labels");
  m.split = dir / (name + ".split.json");
  m.expected_nodes = ds.graph.num_nodes();
  m.expected_edges = ds.graph.num_edges();
  m.expected_classes = ds.split.num_classes;
  m.split_sizes = {ds.split.train.size(), ds.split.val.size(), ds.split.test.size()};
  m.normalize_features = false;

  auto id = [&](Index i) -> const std::string& { return ds.node_ids[static_cast<std::size_t>(i)]; };
  {
    std::ofstream out(m.edges);
    for (const auto& [i, j] : ds.graph.edge_list()) out << id(i) << ' ' << id(j) << '\n';
    if (!out) throw IoError("cannot write " + m.edges.string());
  }
  {
    std::ofstream out(m.labels);
    for (Index i = 0; i < ds.graph.num_nodes(); ++i)
      out << id(i) << ' ' << ds.class_names[static_cast<std::size_t>(ds.split.labels[static_cast<std::size_t>(i)])] << '\n';
    if (!out) throw IoError("cannot write " + m.labels.string());
  }
  if (ds.graph.has_features()) {
    m.features = dir / (name + ".features");
    std::ofstream out(*m.features);
    const SparseMatrix& x = *ds.graph.shared_features();
    char buf[64];
    for (Index r = 0; r < x.outerSize(); ++r) {
      out << id(r);
      for (SparseMatrix::InnerIterator e(x, r); e; ++e) {
        std::snprintf(buf, sizeof buf, " %lld:%.17g", static_cast<long long>(e.col()), e.value());
        out << buf;
      }
      out << '\n';
    }
    if (!out) throw IoError("cannot write " + m.features->string());
  }
  {
    auto ids = [&](const std::vector<Index>& set) {
      json arr = json::array();
      for (Index v : set) arr.push_back(id(v));
      return arr;
    };
    std::ofstream out(*m.split);
    out << json{{"train", ids(ds.split.train)}, {"val", ids(ds.split.val)}, {"test", ids(ds.split.test)}}.dump()
        << '\n';
    if (!out) throw IoError("cannot write " + m.split->string());
  }
  m.save(dir / "manifest.json");
}

fs::path resolve_manifest(const std::string& dataset, const fs::path& data_root) {
  const fs::path p(dataset);
  if (fs::is_regular_file(p)) return p;
  if (fs::is_directory(p) && fs::exists(p / "manifest.json")) return p / "manifest.json";
  const fs::path named = data_root / dataset / "manifest.json";
  if (fs::exists(named)) return named;
  throw IoError("dataset '" + dataset + "' not found (looked for a manifest file, " + dataset +
                "/manifest.json and " + named.string() + ")");
}

}  // namespace advgraph
