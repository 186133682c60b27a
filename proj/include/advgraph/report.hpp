#pragma once

#include "advgraph/evaluation.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace advgraph {

/// Toolkit version embedded in every report and config hash.
std::string toolkit_version();

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

/// CSV with one row per (dataset, attack, detector) and, for every defense
/// present, the columns <defense>:ADR, :ACD, :ASR and :accuracy. Missing values
/// are empty.
std::string report_table(std::span<const EvalReport> reports);

/// Paths written by emit_report.
struct ReportFiles {
  std::filesystem::path table;
  std::filesystem::path dump;
  std::vector<std::filesystem::path> plots;
};

/// Writes table.csv, report.json (all records and configs) and one
/// plots/<dataset>_<detector>_<attack>_<defense>.tsv per report into dir.
/// Throws DataError when an aggregate is NaN and IoError on write failures.
ReportFiles emit_report(std::span<const EvalReport> reports, const std::filesystem::path& dir);

/// Reads a report.json written by emit_report.
std::vector<EvalReport> load_report_dump(const std::filesystem::path& path);

}  // namespace advgraph
