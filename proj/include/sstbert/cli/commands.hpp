#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>

#include "sstbert/cli/run_config.hpp"

namespace sstbert::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumeric = 3 };

/// Operator mistakes: missing flags, refused overwrites.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommandOptions {
  bool force = false;
  bool resume = false;
  std::optional<std::string> text;
  std::optional<std::filesystem::path> checkpoint;
  /// Recorded in checkpoint provenance.
  std::string command_line;
};

void cmd_prepare(const RunConfig& config, const CommandOptions& options, std::ostream& out);
void cmd_vocab(const RunConfig& config, const CommandOptions& options, std::ostream& out);
void cmd_pretrain(const RunConfig& config, const CommandOptions& options, std::ostream& out);
void cmd_finetune(const RunConfig& config, const CommandOptions& options, std::ostream& out);
void cmd_eval(const RunConfig& config, const CommandOptions& options, std::ostream& out);
void cmd_predict(const RunConfig& config, const CommandOptions& options, std::ostream& out);

/// Parses flags, runs one subcommand, and maps failures to exit codes:
/// 1 usage or config, 2 data (files, formats, mismatches), 3 numeric.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sstbert::cli
