#pragma once

// The four wss subcommands. Each writes its report files plus a run
// manifest into the output directory and returns the paths written.
// Statistical non-convergence is reported inside the files; only I/O,
// parse and invalid-input problems surface as Error.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "wss/cli/config.hpp"
#include "wss/error.hpp"

namespace wss::cli {

// Exit codes of the wss executable.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitParse = 2;
inline constexpr int kExitInvalidInput = 3;

int exit_code_for(ErrorCode code) noexcept;

std::string software_version();

struct RunOptions {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<OutputFormat> format;
  std::optional<std::string> data;  // dataset path for fit
  int workers = 0;                  // 0: hardware concurrency
};

// Config with the command-line overrides applied.
StudyConfig effective_config(StudyConfig config, const RunOptions& options);

struct CommandResult {
  std::vector<std::string> outputs;  // report files, manifest last
  std::string summary;               // one human-readable line
};

CommandResult cmd_fit(const StudyConfig& config, const RunOptions& options);
CommandResult cmd_simulate(const StudyConfig& config, const RunOptions& options);
CommandResult cmd_contrasts(const StudyConfig& config, const RunOptions& options);
CommandResult cmd_med(const StudyConfig& config, const RunOptions& options);

}  // namespace wss::cli
