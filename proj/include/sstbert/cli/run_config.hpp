#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include "sstbert/classify/classify.hpp"
#include "sstbert/objectives/objectives.hpp"
#include "sstbert/treebank/corpus.hpp"

namespace sstbert::cli {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Command-line values that take precedence over the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset;
  std::optional<std::string> task;
  std::optional<std::string> scope;
};

/// Everything a run needs, resolved and validated up front. Relative paths
/// in the file are taken relative to the file's directory.
struct RunConfig {
  std::filesystem::path sst_dir;
  std::filesystem::path work_dir;
  std::string preset = "toy";
  std::size_t vocab_size = 2000;

  objectives::PretrainHyper pretrain;
  classify::Task task = classify::Task::sst5;
  classify::FinetuneHyper finetune;
  std::string scope = "all,root";
  treebank::Split eval_split = treebank::Split::dev;
  std::uint64_t seed = 0;

  std::filesystem::path sentences_path(treebank::Split split) const;
  std::filesystem::path stats_path(const std::string& extension) const;
  std::filesystem::path vocab_path() const;
  std::filesystem::path pretrain_checkpoint() const;
  std::filesystem::path loss_csv() const;
  std::filesystem::path finetune_checkpoint() const;
  std::filesystem::path finetune_summary() const;
  std::filesystem::path report_path(const std::string& extension) const;

  /// Sectioned `key = value` text holding every resolved value.
  std::string to_ini() const;
};

/// Throws ConfigError on unreadable files, unknown keys, bad values, or a
/// missing required key.
RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides = {});

}  // namespace sstbert::cli
