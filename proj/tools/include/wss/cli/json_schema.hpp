#pragma once

// A small JSON Schema validator covering the keywords used by the embedded
// schemas: type, const, enum, required, properties, additionalProperties,
// items, minItems, minimum, maximum.

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace wss::cli {

struct SchemaIssue {
  std::string path;  // JSON pointer to the offending value
  std::string message;
};

std::vector<SchemaIssue> validate_json(const nlohmann::json& instance,
                                       const nlohmann::json& schema);

// Throws Error(kParse) listing the first few issues.
void require_valid(const nlohmann::json& instance, const nlohmann::json& schema,
                   const std::string& what);

enum class ReportKind { kRegression, kMcpMod, kFit, kContrasts, kMed, kManifest };

inline constexpr int kReportSchemaVersion = 1;

const nlohmann::json& config_schema();
const nlohmann::json& report_schema(ReportKind kind);

}  // namespace wss::cli
