#include "advgraph/report.hpp"

#include "advgraph/defense.hpp"
#include "advgraph/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace advgraph {

using nlohmann::json;
namespace fs = std::filesystem;

std::string toolkit_version() { return ADVGRAPH_VERSION; }

namespace {

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_double(const json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

void check_finite(const EvalReport& r) {
  auto check = [&](const char* what, std::optional<double> v) {
    if (v && !std::isfinite(*v))
      throw DataError("non-finite " + std::string(what) + " in report " + r.dataset + "/" +
                      r.defense + "/" + r.attack);
  };
  check("ASR", r.asr);
  check("ADR", r.adr);
  check("ACD", r.acd);
  check("accuracy", r.accuracy);
  check("protected ASR", r.protected_asr);
  check("protected ADR", r.protected_adr);
  check("protected ACD", r.protected_acd);
  for (const auto& rec : r.records)
    if (!std::isfinite(rec.cd_before) || !std::isfinite(rec.cd_after))
      throw DataError("non-finite margin for node " + std::to_string(rec.node));
}

std::string format_cell(std::optional<double> v) {
  if (!v) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

int defense_rank(const std::string& name) {
  try {
    return static_cast<int>(parse_defense_strategy(name));
  } catch (const ConfigError&) {
    return 100;
  }
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

json report_to_json(const EvalReport& r) {
  json records = json::array();
  for (const auto& rec : r.records) {
    json flips = json::array();
    for (const auto& f : rec.flips) flips.push_back({f.i, f.j, f.theta});
    records.push_back({{"node", rec.node},
                       {"label", rec.label},
                       {"correct_before", rec.correct_before},
                       {"success", rec.success},
                       {"cd_before", rec.cd_before},
                       {"cd_after", rec.cd_after},
                       {"flips", flips}});
  }
  return {{"dataset", r.dataset},
          {"defense", r.defense},
          {"attack", r.attack},
          {"detector", r.detector},
          {"asr", r.asr},
          {"adr", optional_json(r.adr)},
          {"acd", optional_json(r.acd)},
          {"accuracy", optional_json(r.accuracy)},
          {"baseline_asr", optional_json(r.baseline_asr)},
          {"population", r.population},
          {"targets_evaluated", r.records.size()},
          {"protected_label", r.protected_label ? json(*r.protected_label) : json(nullptr)},
          {"protected_asr", optional_json(r.protected_asr)},
          {"protected_adr", optional_json(r.protected_adr)},
          {"protected_acd", optional_json(r.protected_acd)},
          {"protected_baseline_asr", optional_json(r.protected_baseline_asr)},
          {"config", r.config},
          {"records", records}};
}

EvalReport report_from_json(const json& j) {
  EvalReport r;
  try {
    r.dataset = j.at("dataset").get<std::string>();
    r.defense = j.at("defense").get<std::string>();
    r.attack = j.at("attack").get<std::string>();
    r.detector = j.at("detector").get<std::string>();
    r.asr = j.at("asr").get<double>();
    r.adr = optional_double(j, "adr");
    r.acd = optional_double(j, "acd");
    r.accuracy = optional_double(j, "accuracy");
    r.baseline_asr = optional_double(j, "baseline_asr");
    r.population = j.at("population").get<std::size_t>();
    if (!j.at("protected_label").is_null()) r.protected_label = j.at("protected_label").get<int>();
    r.protected_asr = optional_double(j, "protected_asr");
    r.protected_adr = optional_double(j, "protected_adr");
    r.protected_acd = optional_double(j, "protected_acd");
    r.protected_baseline_asr = optional_double(j, "protected_baseline_asr");
    r.config = j.at("config");
    for (const auto& e : j.at("records")) {
      NodeRecord rec;
      rec.node = e.at("node").get<Index>();
      rec.label = e.at("label").get<int>();
      rec.correct_before = e.at("correct_before").get<bool>();
      rec.success = e.at("success").get<bool>();
      rec.cd_before = e.at("cd_before").get<double>();
      rec.cd_after = e.at("cd_after").get<double>();
      for (const auto& f : e.at("flips"))
        rec.flips.push_back(Flip{f.at(0).get<Index>(), f.at(1).get<Index>(), f.at(2).get<int>()});
      r.records.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

std::string report_table(std::span<const EvalReport> reports) {
  std::vector<std::string> defenses;
  for (const auto& r : reports)
    if (std::find(defenses.begin(), defenses.end(), r.defense) == defenses.end()) defenses.push_back(r.defense);
  std::stable_sort(defenses.begin(), defenses.end(),
                   [](const std::string& a, const std::string& b) { return defense_rank(a) < defense_rank(b); });

  using RowKey = std::tuple<std::string, std::string, std::string>;
  std::vector<RowKey> rows;
  std::map<std::pair<RowKey, std::string>, const EvalReport*> cells;
  for (const auto& r : reports) {
    RowKey key{r.dataset, r.attack, r.detector};
    if (std::find(rows.begin(), rows.end(), key) == rows.end()) rows.push_back(key);
    cells[{key, r.defense}] = &r;
  }

  std::ostringstream out;
  out << "dataset,attack,detector";
  for (const auto& d : defenses) out << ',' << d << ":ADR," << d << ":ACD," << d << ":ASR," << d << ":accuracy";
  out << '\n';
  for (const auto& key : rows) {
    out << std::get<0>(key) << ',' << std::get<1>(key) << ',' << std::get<2>(key);
    for (const auto& d : defenses) {
      const auto it = cells.find({key, d});
      const EvalReport* r = it == cells.end() ? nullptr : it->second;
      out << ',' << (r ? format_cell(r->adr) : "") << ',' << (r ? format_cell(r->acd) : "") << ','
          << (r ? format_cell(r->asr) : "") << ',' << (r ? format_cell(r->accuracy) : "");
    }
    out << '\n';
  }
  return out.str();
}

ReportFiles emit_report(std::span<const EvalReport> reports, const fs::path& dir) {
  for (const auto& r : reports) check_finite(r);
  std::error_code ec;
  fs::create_directories(dir / "plots", ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  ReportFiles files;
  files.table = dir / "table.csv";
  write_file(files.table, report_table(reports));

  json dump = {{"toolkit_version", toolkit_version()}, {"reports", json::array()}};
  for (const auto& r : reports) dump["reports"].push_back(report_to_json(r));
  files.dump = dir / "report.json";
  write_file(files.dump, dump.dump(1) + "\n");

  for (const auto& r : reports) {
    std::ostringstream tsv;
    tsv << "node\tlabel\tcd_before\tcd_after\tsuccess\n";
    char buf[128];
    for (const auto& rec : r.records) {
      std::snprintf(buf, sizeof buf, "%lld\t%d\t%.17g\t%.17g\t%d\n", static_cast<long long>(rec.node),
                    rec.label, rec.cd_before, rec.cd_after, rec.success ? 1 : 0);
      tsv << buf;
    }
    const fs::path p = dir / "plots" / (r.dataset + "_" + r.detector + "_" + r.attack + "_" + r.defense + ".tsv");
    write_file(p, tsv.str());
    files.plots.push_back(p);
  }
  return files;
}

std::vector<EvalReport> load_report_dump(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  json dump;
  try {
    dump = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  std::vector<EvalReport> out;
  if (!dump.contains("reports")) throw DataError(path.string() + ": no 'reports' array");
  for (const auto& r : dump.at("reports")) out.push_back(report_from_json(r));
  return out;
}

}  // namespace advgraph
