#include "wss/cli/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "wss/cli/json_schema.hpp"
#include "wss/error.hpp"

namespace wss::cli {

using nlohmann::json;

const char* to_string(Mode m) noexcept {
  switch (m) {
    case Mode::kFit: return "fit";
    case Mode::kSimRegression: return "sim-regression";
    case Mode::kSimMcpMod: return "sim-mcpmod";
    case Mode::kContrasts: return "contrasts";
    case Mode::kMed: return "med";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::kFit, Mode::kSimRegression, Mode::kSimMcpMod, Mode::kContrasts, Mode::kMed})
    if (s == to_string(m)) return m;
  throw Error(ErrorCode::kParse, "unknown mode '" + s + "'");
}

const char* to_string(OutputFormat f) noexcept { return f == OutputFormat::kCsv ? "csv" : "json"; }

OutputFormat format_from_string(const std::string& s) {
  if (s == "csv") return OutputFormat::kCsv;
  if (s == "json") return OutputFormat::kJson;
  throw Error(ErrorCode::kParse, "unknown output format '" + s + "' (expected csv or json)");
}

DoseResponseModel ModelConfig::to_model() const {
  if (!reference.empty()) return reference_model(reference);
  DoseResponseModel m;
  m.family = dose_family_from_string(family);
  m.theta0 = theta0;
  m.theta1 = theta1;
  m.nonlinear = nonlinear;
  m.scal = scal;
  m.validate();
  return m;
}

ModelConfig ModelConfig::explicit_from(const DoseResponseModel& m) {
  ModelConfig c;
  c.family = wss::to_string(m.family);
  c.theta0 = m.theta0;
  c.theta1 = m.theta1;
  c.nonlinear = m.nonlinear;
  c.scal = m.scal;
  return c;
}

std::vector<DoseResponseModel> McpModBlock::candidate_models() const {
  if (candidates.empty()) return reference_candidates();
  std::vector<DoseResponseModel> out;
  for (const auto& c : candidates) out.push_back(c.to_model());
  return out;
}

namespace {

template <class T>
void read(const json& obj, const char* key, T& target) {
  if (!obj.contains(key)) return;
  try {
    target = obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config key '") + key + "': " + e.what());
  }
}

ModelConfig parse_model(const json& j) {
  ModelConfig m;
  read(j, "reference", m.reference);
  read(j, "family", m.family);
  read(j, "theta0", m.theta0);
  read(j, "theta1", m.theta1);
  read(j, "nonlinear", m.nonlinear);
  read(j, "scal", m.scal);
  return m;
}

json model_json(const ModelConfig& m) {
  if (!m.reference.empty()) return json{{"reference", m.reference}};
  return json{{"family", m.family},       {"theta0", m.theta0}, {"theta1", m.theta1},
              {"nonlinear", m.nonlinear}, {"scal", m.scal}};
}

std::vector<ModelConfig> parse_models(const json& obj, const char* key) {
  std::vector<ModelConfig> out;
  if (!obj.contains(key)) return out;
  for (const auto& m : obj.at(key)) out.push_back(parse_model(m));
  return out;
}

json models_json(const std::vector<ModelConfig>& ms) {
  json arr = json::array();
  for (const auto& m : ms) arr.push_back(model_json(m));
  return arr;
}

}  // namespace

StudyConfig parse_config(const json& j) {
  require_valid(j, config_schema(), "config");
  StudyConfig c;
  read(j, "schema_version", c.schema_version);
  c.mode = mode_from_string(j.at("mode").get<std::string>());
  read(j, "seed", c.seed);
  read(j, "replicates", c.replicates);
  read(j, "strategies", c.strategies);
  if (j.contains("format")) c.format = format_from_string(j.at("format").get<std::string>());
  read(j, "output_dir", c.output_dir);
  read(j, "write_records", c.write_records);

  if (j.contains("regression")) {
    const json& r = j["regression"];
    read(r, "p", c.regression.p);
    read(r, "n", c.regression.n);
    read(r, "sigma", c.regression.sigma);
    read(r, "censor_rate", c.regression.censor_rate);
    read(r, "q", c.regression.q);
    read(r, "alpha", c.regression.alpha);
    read(r, "psi", c.regression.psi);
  }
  if (j.contains("mcpmod")) {
    const json& m = j["mcpmod"];
    read(m, "truth", c.mcpmod.truth);
    read(m, "n_per_dose", c.mcpmod.n_per_dose);
    read(m, "censor_rate", c.mcpmod.censor_rate);
    read(m, "doses", c.mcpmod.doses);
    read(m, "sigma", c.mcpmod.sigma);
    read(m, "delta", c.mcpmod.delta);
    read(m, "alpha", c.mcpmod.alpha);
    c.mcpmod.candidates = parse_models(m, "candidates");
    read(m, "sampler_seed", c.mcpmod.sampler_seed);
    read(m, "sampler_draws", c.mcpmod.sampler_draws);
  }
  if (j.contains("fit")) {
    const json& f = j["fit"];
    read(f, "data", c.fit.data);
    read(f, "sigma", c.fit.sigma);
    read(f, "c", c.fit.c);
    read(f, "beta0", c.fit.beta0);
    read(f, "q", c.fit.q);
    read(f, "null_values", c.fit.null_values);
  }
  if (j.contains("contrasts")) {
    const json& k = j["contrasts"];
    read(k, "candidates", c.contrasts.candidates);
    read(k, "s", c.contrasts.s);
    read(k, "s_diagonal", c.contrasts.s_diagonal);
    read(k, "n_per_dose", c.contrasts.n_per_dose);
    read(k, "sigma", c.contrasts.sigma);
    read(k, "doses", c.contrasts.doses);
  }
  if (j.contains("med")) {
    const json& m = j["med"];
    c.med.models = parse_models(m, "models");
    read(m, "delta", c.med.delta);
    read(m, "doses", c.med.doses);
  }
  strategies_of(c);  // rejects unknown names
  return c;
}

StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, "config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

json serialize(const StudyConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["mode"] = to_string(c.mode);
  j["seed"] = c.seed;
  j["replicates"] = c.replicates;
  j["strategies"] = c.strategies;
  j["format"] = to_string(c.format);
  j["output_dir"] = c.output_dir;
  j["write_records"] = c.write_records;
  j["regression"] = {{"p", c.regression.p},
                     {"n", c.regression.n},
                     {"sigma", c.regression.sigma},
                     {"censor_rate", c.regression.censor_rate},
                     {"q", c.regression.q},
                     {"alpha", c.regression.alpha},
                     {"psi", c.regression.psi}};
  j["mcpmod"] = {{"truth", c.mcpmod.truth},
                 {"n_per_dose", c.mcpmod.n_per_dose},
                 {"censor_rate", c.mcpmod.censor_rate},
                 {"doses", c.mcpmod.doses},
                 {"sigma", c.mcpmod.sigma},
                 {"delta", c.mcpmod.delta},
                 {"alpha", c.mcpmod.alpha},
                 {"candidates", models_json(c.mcpmod.candidates)},
                 {"sampler_seed", c.mcpmod.sampler_seed},
                 {"sampler_draws", c.mcpmod.sampler_draws}};
  j["fit"] = {{"data", c.fit.data},   {"sigma", c.fit.sigma}, {"c", c.fit.c},
              {"beta0", c.fit.beta0}, {"q", c.fit.q},         {"null_values", c.fit.null_values}};
  j["contrasts"] = {{"candidates", c.contrasts.candidates},
                    {"s", c.contrasts.s},
                    {"s_diagonal", c.contrasts.s_diagonal},
                    {"n_per_dose", c.contrasts.n_per_dose},
                    {"sigma", c.contrasts.sigma},
                    {"doses", c.contrasts.doses}};
  j["med"] = {{"models", models_json(c.med.models)},
              {"delta", c.med.delta},
              {"doses", c.med.doses}};
  return j;
}

std::string config_hash(const StudyConfig& c) {
  const std::string text = serialize(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<Strategy> strategies_of(const StudyConfig& c) {
  std::vector<Strategy> out;
  for (const auto& s : c.strategies) out.push_back(strategy_from_string(s));
  return out;
}

}  // namespace wss::cli
