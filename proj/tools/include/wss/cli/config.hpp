#pragma once

// Study configuration: a JSON document selecting one mode and the blocks it
// needs. serialize() writes every field, so parse(serialize(c)) == c.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wss/dose_response.hpp"
#include "wss/study.hpp"

namespace wss::cli {

inline constexpr int kConfigSchemaVersion = 1;

enum class Mode { kFit, kSimRegression, kSimMcpMod, kContrasts, kMed };

const char* to_string(Mode m) noexcept;
Mode mode_from_string(const std::string& s);

enum class OutputFormat { kCsv, kJson };

const char* to_string(OutputFormat f) noexcept;
OutputFormat format_from_string(const std::string& s);

// A dose-response model, either a named reference curve or explicit
// parameters.
struct ModelConfig {
  std::string reference;  // empty when explicit
  std::string family = "linear";
  double theta0 = 0.0;
  double theta1 = 1.0;
  std::vector<double> nonlinear;
  double scal = 0.0;

  DoseResponseModel to_model() const;
  static ModelConfig explicit_from(const DoseResponseModel& m);
  bool operator==(const ModelConfig&) const = default;
};

struct RegressionBlock {
  int p = 3;
  std::vector<int> n = {20};
  double sigma = 1.0;
  std::vector<double> censor_rate = {0.25};
  int q = 1;
  double alpha = 0.05;
  std::vector<double> psi = {0.05, 0.10, 0.25, 0.50};

  bool operator==(const RegressionBlock&) const = default;
};

struct McpModBlock {
  std::vector<std::string> truth = {"emax"};
  std::vector<int> n_per_dose = {10};
  std::vector<double> censor_rate = {0.10};
  std::vector<double> doses = {0.0, 5.0, 25.0, 50.0, 100.0};
  double sigma = 0.5;
  double delta = 0.6931471805599453;
  double alpha = 0.05;
  std::vector<ModelConfig> candidates;  // empty: the reference candidate set
  std::uint64_t sampler_seed = MaxNormalSampler::kDefaultSeed;
  int sampler_draws = MaxNormalSampler::kDefaultDraws;

  std::vector<DoseResponseModel> candidate_models() const;
  bool operator==(const McpModBlock&) const = default;
};

struct FitBlock {
  std::string data;  // CSV with y, delta, x1..xp
  double sigma = 1.0;
  // Wald contrast C beta = beta0. Empty c: test the leading q coefficients
  // against null_values (zeros when empty).
  std::vector<std::vector<double>> c;
  std::vector<double> beta0;
  int q = 1;
  std::vector<double> null_values;

  bool operator==(const FitBlock&) const = default;
};

struct ContrastsBlock {
  std::vector<std::string> candidates;      // reference names; empty: all five
  std::vector<std::vector<double>> s;       // full covariance, or
  std::vector<double> s_diagonal;           // its diagonal, or
  int n_per_dose = 10;                      // S = sigma^2 / n I
  double sigma = 0.5;
  std::vector<double> doses = {0.0, 5.0, 25.0, 50.0, 100.0};

  bool operator==(const ContrastsBlock&) const = default;
};

struct MedBlock {
  std::vector<ModelConfig> models;  // empty: the reference non-constant curves
  double delta = 0.6931471805599453;
  std::vector<double> doses = {0.0, 5.0, 25.0, 50.0, 100.0};

  bool operator==(const MedBlock&) const = default;
};

struct StudyConfig {
  int schema_version = kConfigSchemaVersion;
  Mode mode = Mode::kSimMcpMod;
  std::uint64_t seed = 1;
  int replicates = 500;
  std::vector<std::string> strategies = {"MLE", "MLE2", "BCE", "BCE2", "Firth"};
  OutputFormat format = OutputFormat::kCsv;
  std::string output_dir = ".";
  bool write_records = false;

  RegressionBlock regression;
  McpModBlock mcpmod;
  FitBlock fit;
  ContrastsBlock contrasts;
  MedBlock med;

  bool operator==(const StudyConfig&) const = default;
};

// Throws Error(kParse) with the offending key on malformed input.
StudyConfig parse_config(const nlohmann::json& j);
StudyConfig load_config(const std::string& path);
nlohmann::json serialize(const StudyConfig& c);

// FNV-1a 64-bit hash of the canonical serialization, as 16 hex digits.
std::string config_hash(const StudyConfig& c);

std::vector<Strategy> strategies_of(const StudyConfig& c);

}  // namespace wss::cli
