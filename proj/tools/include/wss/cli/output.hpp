#pragma once

// Table and report writers. Numbers are printed in the shortest form that
// round-trips, so repeated runs produce byte-identical files.

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wss/study.hpp"

namespace wss::cli {

// Shortest round-trip decimal; "NA" for NaN, "Inf"/"-Inf" for infinities.
std::string format_number(double x);

// NaN and infinities become null.
nlohmann::json json_number(double x);

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);

  CsvTable& cell(const std::string& text);
  CsvTable& cell(double x);
  CsvTable& cell(int x);
  CsvTable& cell(std::uint64_t x);
  void end_row();

  const std::vector<std::string>& header() const noexcept { return header_; }
  std::size_t rows() const noexcept { return rows_.size(); }
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
  std::vector<std::string> current_;
};

// Writes text to path, creating parent directories. Throws Error(kIo).
void write_text(const std::string& path, const std::string& text);

std::string join_path(const std::string& dir, const std::string& file);

// Regression study tables.
std::string scenario_label(const RegressionScenario& s);
CsvTable regression_estimator_table(const std::vector<RegressionReport>& reports);
CsvTable regression_test_table(const std::vector<RegressionReport>& reports);
CsvTable regression_distance_table(const std::vector<RegressionReport>& reports);
nlohmann::json regression_report_json(const std::vector<RegressionReport>& reports,
                                      std::uint64_t seed);

// MCP-Mod operating characteristics: one row per (scenario, strategy).
std::string scenario_label(const McpModScenario& s);
CsvTable oc_table(const std::vector<McpModReport>& reports);
nlohmann::json mcpmod_report_json(const std::vector<McpModReport>& reports,
                                  std::uint64_t seed);

struct Manifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
  std::string started_at;  // ISO 8601, UTC
  double wall_time = 0.0;  // seconds
  std::string mode;
  int workers = 0;
  std::vector<std::string> outputs;
};

std::string iso8601_utc(std::chrono::system_clock::time_point t);
nlohmann::json manifest_json(const Manifest& m);
Manifest parse_manifest(const nlohmann::json& j);

// Pretty-printed JSON with a trailing newline.
std::string dump_json(const nlohmann::json& j);

}  // namespace wss::cli
