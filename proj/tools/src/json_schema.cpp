#include "wss/cli/json_schema.hpp"

#include <cmath>
#include <map>

#include "wss/error.hpp"

namespace wss::cli {

using nlohmann::json;

namespace {

bool has_type(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  return false;
}

void check(const json& v, const json& schema, const std::string& path,
           std::vector<SchemaIssue>& out) {
  if (schema.contains("type")) {
    const json& t = schema["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = has_type(v, t.get<std::string>());
    } else {
      for (const auto& alt : t) ok = ok || has_type(v, alt.get<std::string>());
    }
    if (!ok) {
      out.push_back({path, "expected type " + t.dump()});
      return;
    }
  }
  if (schema.contains("const") && v != schema["const"]) {
    out.push_back({path, "expected " + schema["const"].dump()});
  }
  if (schema.contains("enum")) {
    bool found = false;
    for (const auto& e : schema["enum"]) found = found || v == e;
    if (!found) out.push_back({path, "value " + v.dump() + " not in " + schema["enum"].dump()});
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (schema.contains("minimum") && x < schema["minimum"].get<double>()) {
      out.push_back({path, "below minimum " + schema["minimum"].dump()});
    }
    if (schema.contains("maximum") && x > schema["maximum"].get<double>()) {
      out.push_back({path, "above maximum " + schema["maximum"].dump()});
    }
  }
  if (v.is_object()) {
    if (schema.contains("required")) {
      for (const auto& key : schema["required"]) {
        if (!v.contains(key.get<std::string>())) {
          out.push_back({path + "/" + key.get<std::string>(), "required key missing"});
        }
      }
    }
    const json* props = schema.contains("properties") ? &schema["properties"] : nullptr;
    const bool closed = schema.value("additionalProperties", true) == false;
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string child = path + "/" + it.key();
      if (props && props->contains(it.key())) {
        check(it.value(), (*props)[it.key()], child, out);
      } else if (closed) {
        out.push_back({child, "unknown key"});
      }
    }
  }
  if (v.is_array()) {
    if (schema.contains("minItems") && v.size() < schema["minItems"].get<std::size_t>()) {
      out.push_back({path, "fewer than " + schema["minItems"].dump() + " items"});
    }
    if (schema.contains("items")) {
      for (std::size_t i = 0; i < v.size(); ++i)
        check(v[i], schema["items"], path + "/" + std::to_string(i), out);
    }
  }
}

// Schemas are kept as JSON text and parsed once on first use.

constexpr const char* kModelSchema = R"({
  "type": "object", "additionalProperties": false,
  "properties": {
    "reference": {"enum": ["constant", "linear", "emax", "exponential", "logistic", "beta"]},
    "family": {"enum": ["linear", "emax", "exponential", "logistic", "beta"]},
    "theta0": {"type": "number"}, "theta1": {"type": "number"},
    "nonlinear": {"type": "array", "items": {"type": "number", "minimum": 0}},
    "scal": {"type": "number", "minimum": 0}
  }
})";

constexpr const char* kConfigSchema = R"({
  "$id": "wss/config/1",
  "type": "object", "additionalProperties": false,
  "required": ["mode"],
  "properties": {
    "schema_version": {"const": 1},
    "mode": {"enum": ["fit", "sim-regression", "sim-mcpmod", "contrasts", "med"]},
    "seed": {"type": "integer", "minimum": 0},
    "replicates": {"type": "integer", "minimum": 0},
    "strategies": {"type": "array", "minItems": 1,
                   "items": {"enum": ["MLE", "MLE2", "BCE", "BCE2", "Firth"]}},
    "format": {"enum": ["csv", "json"]},
    "output_dir": {"type": "string"},
    "write_records": {"type": "boolean"},
    "regression": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "p": {"type": "integer", "minimum": 1, "maximum": 7},
        "n": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "sigma": {"type": "number", "minimum": 0},
        "censor_rate": {"type": "array", "minItems": 1,
                        "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "q": {"type": "integer", "minimum": 1},
        "alpha": {"type": "number", "minimum": 0, "maximum": 1},
        "psi": {"type": "array", "items": {"type": "number"}}
      }
    },
    "mcpmod": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "truth": {"type": "array", "minItems": 1,
                  "items": {"enum": ["constant", "linear", "emax", "exponential", "logistic", "beta"]}},
        "n_per_dose": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 1}},
        "censor_rate": {"type": "array", "minItems": 1,
                        "items": {"type": "number", "minimum": 0, "maximum": 1}},
        "doses": {"type": "array", "minItems": 2, "items": {"type": "number", "minimum": 0}},
        "sigma": {"type": "number", "minimum": 0},
        "delta": {"type": "number", "minimum": 0},
        "alpha": {"type": "number", "minimum": 0, "maximum": 1},
        "candidates": {"type": "array", "items": MODEL},
        "sampler_seed": {"type": "integer", "minimum": 0},
        "sampler_draws": {"type": "integer", "minimum": 100}
      }
    },
    "fit": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "data": {"type": "string"},
        "sigma": {"type": "number", "minimum": 0},
        "c": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "beta0": {"type": "array", "items": {"type": "number"}},
        "q": {"type": "integer", "minimum": 1},
        "null_values": {"type": "array", "items": {"type": "number"}}
      }
    },
    "contrasts": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "candidates": {"type": "array",
                       "items": {"enum": ["linear", "emax", "exponential", "logistic", "beta"]}},
        "s": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "s_diagonal": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "n_per_dose": {"type": "integer", "minimum": 1},
        "sigma": {"type": "number", "minimum": 0},
        "doses": {"type": "array", "minItems": 2, "items": {"type": "number", "minimum": 0}}
      }
    },
    "med": {
      "type": "object", "additionalProperties": false,
      "properties": {
        "models": {"type": "array", "items": MODEL},
        "delta": {"type": "number", "minimum": 0},
        "doses": {"type": "array", "minItems": 2, "items": {"type": "number", "minimum": 0}}
      }
    }
  }
})";

constexpr const char* kProportion = R"({
  "type": "object", "additionalProperties": false,
  "required": ["count", "total", "rate", "se"],
  "properties": {
    "count": {"type": "integer", "minimum": 0}, "total": {"type": "integer", "minimum": 0},
    "rate": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
    "se": {"type": ["number", "null"], "minimum": 0}
  }
})";

constexpr const char* kEstimate = R"({
  "type": "object", "additionalProperties": false,
  "required": ["count", "bias", "rmse", "se"],
  "properties": {
    "index": {"type": "integer", "minimum": 0}, "truth": {"type": "number"},
    "count": {"type": "integer", "minimum": 0}, "bias": {"type": ["number", "null"]},
    "rmse": {"type": ["number", "null"], "minimum": 0}, "se": {"type": ["number", "null"]}
  }
})";

constexpr const char* kDistances = R"({
  "type": "object", "additionalProperties": false, "required": ["d1", "d2", "d3"],
  "properties": {"d1": {"type": "number", "minimum": 0}, "d2": {"type": "number", "minimum": 0},
                 "d3": {"type": "number", "minimum": 0}}
})";

constexpr const char* kRegressionReport = R"({
  "$id": "wss/report/regression/1",
  "type": "object", "additionalProperties": false,
  "required": ["schema_version", "kind", "seed", "cells"],
  "properties": {
    "schema_version": {"const": 1}, "kind": {"const": "regression"},
    "seed": {"type": "integer", "minimum": 0},
    "cells": {"type": "array", "items": {
      "type": "object", "additionalProperties": false,
      "required": ["scenario", "p", "n", "sigma", "censoring", "replicates", "estimators",
                   "distances", "tests"],
      "properties": {
        "scenario": {"type": "string"}, "p": {"type": "integer"}, "n": {"type": "integer"},
        "sigma": {"type": "number"}, "censoring": {"type": "number"},
        "replicates": {"type": "integer"}, "q": {"type": "integer"},
        "censor_times": {"type": "array", "items": {"type": ["number", "null"]}},
        "error": {"type": ["string", "null"]},
        "estimators": {"type": "array", "items": {
          "type": "object", "additionalProperties": false,
          "required": ["estimator", "convergence", "coefficients"],
          "properties": {
            "estimator": {"enum": ["MLE", "BCE", "Firth"]},
            "convergence": PROPORTION,
            "coefficients": {"type": "array", "items": ESTIMATE}
          }}},
        "distances": {"type": "array", "items": {
          "type": "object", "additionalProperties": false,
          "required": ["at", "replicates", "vs_inverse_information", "vs_second_order"],
          "properties": {
            "at": {"enum": ["MLE", "BCE"]}, "replicates": {"type": "integer"},
            "vs_inverse_information": DISTANCES, "vs_second_order": DISTANCES
          }}},
        "tests": {"type": "array", "items": {
          "type": "object", "additionalProperties": false,
          "required": ["variant", "cell", "psi", "rejection"],
          "properties": {
            "variant": {"enum": ["MLE", "MLE2", "BCE", "BCE2", "Firth"]},
            "cell": {"enum": ["type1", "power"]}, "psi": {"type": "number"},
            "rejection": PROPORTION
          }}}
      }}}
  }
})";

constexpr const char* kMcpModReport = R"({
  "$id": "wss/report/mcpmod/1",
  "type": "object", "additionalProperties": false,
  "required": ["schema_version", "kind", "seed", "rows"],
  "properties": {
    "schema_version": {"const": 1}, "kind": {"const": "mcpmod"},
    "seed": {"type": "integer", "minimum": 0},
    "sampler_seed": {"type": "integer", "minimum": 0},
    "sampler_draws": {"type": "integer", "minimum": 0},
    "rows": {"type": "array", "items": {
      "type": "object", "additionalProperties": false,
      "required": ["scenario", "strategy", "n", "censoring", "convergence", "signal",
                   "selection", "med"],
      "properties": {
        "scenario": {"type": "string"},
        "strategy": {"enum": ["MLE", "MLE2", "BCE", "BCE2", "Firth"]},
        "n": {"type": "integer", "minimum": 1}, "censoring": {"type": "number"},
        "replicates": {"type": "integer"},
        "censor_time": {"type": ["number", "null"]},
        "true_med": {"type": ["number", "null"]},
        "convergence": PROPORTION, "signal": PROPORTION, "selection": PROPORTION,
        "med_not_reached": PROPORTION, "med": ESTIMATE,
        "error": {"type": ["string", "null"]}
      }}}
  }
})";

constexpr const char* kFitReport = R"({
  "$id": "wss/report/fit/1",
  "type": "object", "additionalProperties": false,
  "required": ["schema_version", "kind", "n", "p", "sigma", "estimators", "tests"],
  "properties": {
    "schema_version": {"const": 1}, "kind": {"const": "fit"},
    "n": {"type": "integer"}, "p": {"type": "integer"}, "sigma": {"type": "number"},
    "censored_fraction": {"type": "number", "minimum": 0, "maximum": 1},
    "estimators": {"type": "array", "items": {
      "type": "object", "additionalProperties": false,
      "required": ["estimator", "status", "beta"],
      "properties": {
        "estimator": {"enum": ["MLE", "BCE", "Firth"]},
        "status": {"type": "string"}, "iterations": {"type": "integer"},
        "beta": {"type": ["array", "null"], "items": {"type": "number"}},
        "cov_first": {"type": ["array", "null"]},
        "cov_second": {"type": ["array", "null"]},
        "cov_second_pd": {"type": "boolean"}
      }}},
    "tests": {"type": "array", "items": {
      "type": "object", "additionalProperties": false,
      "required": ["variant", "status"],
      "properties": {
        "variant": {"enum": ["MLE", "MLE2", "BCE", "BCE2", "Firth"]},
        "status": {"type": "string"},
        "statistic": {"type": ["number", "null"]}, "df": {"type": "integer"},
        "p_value": {"type": ["number", "null"], "minimum": 0, "maximum": 1}
      }}}
  }
})";

constexpr const char* kContrastsReport = R"({
  "$id": "wss/report/contrasts/1",
  "type": "object", "additionalProperties": false,
  "required": ["schema_version", "kind", "doses", "models", "contrasts", "correlation"],
  "properties": {
    "schema_version": {"const": 1}, "kind": {"const": "contrasts"},
    "doses": {"type": "array", "items": {"type": "number"}},
    "models": {"type": "array", "items": {"type": "string"}},
    "contrasts": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    "correlation": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}}
  }
})";

constexpr const char* kMedReport = R"({
  "$id": "wss/report/med/1",
  "type": "object", "additionalProperties": false,
  "required": ["schema_version", "kind", "delta", "rows"],
  "properties": {
    "schema_version": {"const": 1}, "kind": {"const": "med"},
    "delta": {"type": "number"},
    "rows": {"type": "array", "items": {
      "type": "object", "additionalProperties": false,
      "required": ["model", "status", "med"],
      "properties": {
        "model": {"type": "string"},
        "status": {"enum": ["reached", "clamped", "not-reached"]},
        "med": {"type": ["number", "null"]}
      }}}
  }
})";

constexpr const char* kManifest = R"({
  "$id": "wss/manifest/1",
  "type": "object", "additionalProperties": false,
  "required": ["config_hash", "seed", "version", "started_at", "wall_time"],
  "properties": {
    "config_hash": {"type": "string"}, "seed": {"type": "integer", "minimum": 0},
    "version": {"type": "string"}, "started_at": {"type": "string"},
    "wall_time": {"type": "number", "minimum": 0},
    "mode": {"type": "string"}, "workers": {"type": "integer"},
    "outputs": {"type": "array", "items": {"type": "string"}}
  }
})";

std::string expand(std::string text) {
  const std::map<std::string, const char*> parts = {{"MODEL", kModelSchema},
                                                    {"PROPORTION", kProportion},
                                                    {"ESTIMATE", kEstimate},
                                                    {"DISTANCES", kDistances}};
  for (const auto& [key, value] : parts) {
    for (auto pos = text.find(key); pos != std::string::npos; pos = text.find(key, pos)) {
      text.replace(pos, key.size(), value);
      pos += std::char_traits<char>::length(value);
    }
  }
  return text;
}

}  // namespace

std::vector<SchemaIssue> validate_json(const json& instance, const json& schema) {
  std::vector<SchemaIssue> issues;
  check(instance, schema, "", issues);
  return issues;
}

void require_valid(const json& instance, const json& schema, const std::string& what) {
  const auto issues = validate_json(instance, schema);
  if (issues.empty()) return;
  std::string msg = what + " does not match its schema:";
  for (std::size_t i = 0; i < issues.size() && i < 5; ++i) {
    msg += " " + (issues[i].path.empty() ? std::string("/") : issues[i].path) + ": " +
           issues[i].message + ";";
  }
  throw Error(ErrorCode::kParse, msg);
}

const json& config_schema() {
  static const json schema = json::parse(expand(kConfigSchema));
  return schema;
}

const json& report_schema(ReportKind kind) {
  static const json regression = json::parse(expand(kRegressionReport));
  static const json mcpmod = json::parse(expand(kMcpModReport));
  static const json fit = json::parse(kFitReport);
  static const json contrasts = json::parse(kContrastsReport);
  static const json med = json::parse(kMedReport);
  static const json manifest = json::parse(kManifest);
  switch (kind) {
    case ReportKind::kRegression: return regression;
    case ReportKind::kMcpMod: return mcpmod;
    case ReportKind::kFit: return fit;
    case ReportKind::kContrasts: return contrasts;
    case ReportKind::kMed: return med;
    case ReportKind::kManifest: return manifest;
  }
  return manifest;
}

}  // namespace wss::cli
