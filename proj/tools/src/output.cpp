#include "wss/cli/output.hpp"

#include <charconv>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "wss/cli/json_schema.hpp"
#include "wss/error.hpp"

namespace wss::cli {

using nlohmann::json;

std::string format_number(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

json json_number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::cell(const std::string& text) {
  current_.push_back(text);
  return *this;
}
CsvTable& CsvTable::cell(double x) { return cell(format_number(x)); }
CsvTable& CsvTable::cell(int x) { return cell(std::to_string(x)); }
CsvTable& CsvTable::cell(std::uint64_t x) { return cell(std::to_string(x)); }

void CsvTable::end_row() {
  if (current_.size() != header_.size()) {
    throw Error(ErrorCode::kDimensionMismatch,
                "CSV row has " + std::to_string(current_.size()) + " cells, header has " +
                    std::to_string(header_.size()));
  }
  rows_.push_back(std::move(current_));
  current_.clear();
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for '" + path + "'");
}

std::string join_path(const std::string& dir, const std::string& file) {
  return (std::filesystem::path(dir) / file).string();
}

std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------

std::string scenario_label(const RegressionScenario& s) {
  return "p" + std::to_string(s.p) + "_n" + std::to_string(s.n) + "_sigma" +
         format_number(s.sigma) + "_cens" + format_number(s.censor_rate);
}

namespace {

json proportion_json(const ProportionSummary& p) {
  return {{"count", p.count}, {"total", p.total}, {"rate", json_number(p.rate)},
          {"se", json_number(p.se)}};
}

json estimate_json(const EstimateSummary& e) {
  return {{"count", e.count}, {"bias", json_number(e.bias)}, {"rmse", json_number(e.rmse)},
          {"se", json_number(e.se)}};
}

json distances_json(const MatrixDistanceReport& d) {
  return {{"d1", d.d1}, {"d2", d.d2}, {"d3", d.d3}};
}

void scenario_cells(CsvTable& t, const RegressionReport& r) {
  t.cell(scenario_label(r.scenario))
      .cell(r.scenario.p)
      .cell(r.scenario.n)
      .cell(r.scenario.sigma)
      .cell(r.scenario.censor_rate);
}

const std::vector<std::string> kScenarioColumns = {"scenario", "p", "n", "sigma", "censoring"};

std::vector<std::string> with_scenario(std::vector<std::string> cols) {
  std::vector<std::string> all = kScenarioColumns;
  all.insert(all.end(), cols.begin(), cols.end());
  return all;
}

}  // namespace

CsvTable regression_estimator_table(const std::vector<RegressionReport>& reports) {
  CsvTable t(with_scenario({"estimator", "coefficient", "truth", "convergence", "count", "bias",
                            "rmse", "bias_se"}));
  for (const auto& r : reports) {
    const Vector truth = r.scenario.beta_true();
    for (const auto& e : r.estimators) {
      for (std::size_t j = 0; j < e.coefficients.size(); ++j) {
        const auto& c = e.coefficients[j];
        scenario_cells(t, r);
        t.cell(to_string(e.kind))
            .cell(static_cast<int>(j + 1))
            .cell(truth(static_cast<Eigen::Index>(j)))
            .cell(e.convergence.rate)
            .cell(c.count)
            .cell(c.bias)
            .cell(c.rmse)
            .cell(c.se);
        t.end_row();
      }
    }
  }
  return t;
}

CsvTable regression_test_table(const std::vector<RegressionReport>& reports) {
  CsvTable t(with_scenario({"variant", "cell", "psi", "rejections", "valid", "rate", "mc_se"}));
  for (const auto& r : reports) {
    for (const auto& x : r.rejections) {
      scenario_cells(t, r);
      t.cell(to_string(x.variant))
          .cell(x.power ? "power" : "type1")
          .cell(x.psi)
          .cell(x.rate.count)
          .cell(x.rate.total)
          .cell(x.rate.rate)
          .cell(x.rate.se);
      t.end_row();
    }
  }
  return t;
}

CsvTable regression_distance_table(const std::vector<RegressionReport>& reports) {
  CsvTable t(with_scenario({"at", "reference", "d1", "d2", "d3", "replicates"}));
  for (const auto& r : reports) {
    for (const auto& d : r.distances) {
      for (int k = 0; k < 2; ++k) {
        const auto& m = k == 0 ? d.vs_first : d.vs_second;
        scenario_cells(t, r);
        t.cell(to_string(d.at))
            .cell(k == 0 ? "inverse_information" : "second_order")
            .cell(m.d1)
            .cell(m.d2)
            .cell(m.d3)
            .cell(d.replicates);
        t.end_row();
      }
    }
  }
  return t;
}

json regression_report_json(const std::vector<RegressionReport>& reports, std::uint64_t seed) {
  json cells = json::array();
  for (const auto& r : reports) {
    json c;
    c["scenario"] = scenario_label(r.scenario);
    c["p"] = r.scenario.p;
    c["n"] = r.scenario.n;
    c["sigma"] = r.scenario.sigma;
    c["censoring"] = r.scenario.censor_rate;
    c["replicates"] = r.scenario.replicates;
    c["q"] = r.scenario.q;
    json times = json::array();
    for (double t : r.censor_times) times.push_back(json_number(t));
    c["censor_times"] = times;
    c["error"] = r.error ? json(r.message) : json(nullptr);
    json est = json::array();
    const Vector truth = r.scenario.beta_true();
    for (const auto& e : r.estimators) {
      json coefs = json::array();
      for (std::size_t j = 0; j < e.coefficients.size(); ++j) {
        json x = estimate_json(e.coefficients[j]);
        x["index"] = static_cast<int>(j + 1);
        x["truth"] = truth(static_cast<Eigen::Index>(j));
        coefs.push_back(x);
      }
      est.push_back({{"estimator", to_string(e.kind)},
                     {"convergence", proportion_json(e.convergence)},
                     {"coefficients", coefs}});
    }
    c["estimators"] = est;
    json dist = json::array();
    for (const auto& d : r.distances) {
      dist.push_back({{"at", to_string(d.at)},
                      {"replicates", d.replicates},
                      {"vs_inverse_information", distances_json(d.vs_first)},
                      {"vs_second_order", distances_json(d.vs_second)}});
    }
    c["distances"] = dist;
    json tests = json::array();
    for (const auto& x : r.rejections) {
      tests.push_back({{"variant", to_string(x.variant)},
                       {"cell", x.power ? "power" : "type1"},
                       {"psi", x.psi},
                       {"rejection", proportion_json(x.rate)}});
    }
    c["tests"] = tests;
    cells.push_back(c);
  }
  json j = {{"schema_version", kReportSchemaVersion},
            {"kind", "regression"},
            {"seed", seed},
            {"cells", cells}};
  require_valid(j, report_schema(ReportKind::kRegression), "regression report");
  return j;
}

std::string scenario_label(const McpModScenario& s) { return s.truth; }

CsvTable oc_table(const std::vector<McpModReport>& reports) {
  CsvTable t({"scenario", "strategy", "n", "censoring", "convergence", "signal_prob",
              "select_prob", "med_bias", "med_rmse", "mc_se"});
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : reports) {
    for (const auto& row : r.rows) {
      t.cell(scenario_label(r.scenario))
          .cell(to_string(row.strategy))
          .cell(r.scenario.n_per_dose)
          .cell(r.scenario.censor_rate)
          .cell(row.convergence.rate)
          .cell(row.signal.rate)
          .cell(row.selection.rate)
          .cell(row.med_available ? row.med.bias : nan)
          .cell(row.med_available ? row.med.rmse : nan)
          .cell(row.signal.se);
      t.end_row();
    }
  }
  return t;
}

json mcpmod_report_json(const std::vector<McpModReport>& reports, std::uint64_t seed) {
  json rows = json::array();
  std::uint64_t sampler_seed = MaxNormalSampler::kDefaultSeed;
  int draws = MaxNormalSampler::kDefaultDraws;
  for (const auto& r : reports) {
    sampler_seed = r.scenario.sampler_seed;
    draws = r.scenario.sampler_draws;
    for (const auto& row : r.rows) {
      json x;
      x["scenario"] = scenario_label(r.scenario);
      x["strategy"] = to_string(row.strategy);
      x["n"] = r.scenario.n_per_dose;
      x["censoring"] = r.scenario.censor_rate;
      x["replicates"] = r.scenario.replicates;
      x["censor_time"] = json_number(r.censor_time);
      x["true_med"] = r.true_med ? json(*r.true_med) : json(nullptr);
      x["convergence"] = proportion_json(row.convergence);
      x["signal"] = proportion_json(row.signal);
      x["selection"] = proportion_json(row.selection);
      x["med_not_reached"] = proportion_json(row.med_not_reached);
      x["med"] = row.med_available
                     ? estimate_json(row.med)
                     : json{{"count", 0}, {"bias", nullptr}, {"rmse", nullptr}, {"se", nullptr}};
      x["error"] = r.error ? json(r.message) : json(nullptr);
      rows.push_back(x);
    }
  }
  json j = {{"schema_version", kReportSchemaVersion},
            {"kind", "mcpmod"},
            {"seed", seed},
            {"sampler_seed", sampler_seed},
            {"sampler_draws", draws},
            {"rows", rows}};
  require_valid(j, report_schema(ReportKind::kMcpMod), "MCP-Mod report");
  return j;
}

std::string iso8601_utc(std::chrono::system_clock::time_point t) {
  const std::time_t tt = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  gmtime_r(&tt, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json manifest_json(const Manifest& m) {
  json j = {{"config_hash", m.config_hash}, {"seed", m.seed},
            {"version", m.version},         {"started_at", m.started_at},
            {"wall_time", m.wall_time},     {"mode", m.mode},
            {"workers", m.workers},         {"outputs", m.outputs}};
  require_valid(j, report_schema(ReportKind::kManifest), "manifest");
  return j;
}

Manifest parse_manifest(const json& j) {
  require_valid(j, report_schema(ReportKind::kManifest), "manifest");
  Manifest m;
  m.config_hash = j.at("config_hash").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.version = j.at("version").get<std::string>();
  m.started_at = j.at("started_at").get<std::string>();
  m.wall_time = j.at("wall_time").get<double>();
  m.mode = j.value("mode", "");
  m.workers = j.value("workers", 0);
  m.outputs = j.value("outputs", std::vector<std::string>{});
  return m;
}

}  // namespace wss::cli
