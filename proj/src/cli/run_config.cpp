#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdio>
#include <set>

#include "sstbert/cli/run_config.hpp"
#include "sstbert/encoder/config.hpp"

namespace sstbert::cli {

namespace pt = boost::property_tree;

namespace {

const std::set<std::string> kKnownKeys = {
    "paths.sst_dir",          "paths.work_dir",         "model.preset",
    "vocab.size",             "pretrain.epochs",        "pretrain.batch_size",
    "pretrain.lr",            "pretrain.warmup_fraction", "pretrain.max_len",
    "pretrain.mask_rate",     "finetune.task",          "finetune.epochs",
    "finetune.batch_size",    "finetune.lr",            "finetune.warmup_fraction",
    "finetune.max_len",       "finetune.freeze_encoder", "finetune.train_scope",
    "finetune.head_dropout",  "eval.scope",             "eval.split",
    "run.seed"};

template <typename T>
T get(const pt::ptree& tree, const std::string& key, T fallback) {
  const auto node = tree.get_optional<std::string>(key);
  if (!node) return fallback;
  try {
    return tree.get<T>(key);
  } catch (const pt::ptree_bad_data&) {
    throw ConfigError("bad value for " + key + ": '" + *node + "'");
  }
}

std::size_t positive(const pt::ptree& tree, const std::string& key, std::size_t fallback) {
  const auto v = get<long long>(tree, key, static_cast<long long>(fallback));
  if (v <= 0) throw ConfigError(key + " must be positive");
  return static_cast<std::size_t>(v);
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::filesystem::path RunConfig::sentences_path(treebank::Split split) const {
  return work_dir / ("sentences." + std::string(treebank::to_string(split)) + ".txt");
}
std::filesystem::path RunConfig::stats_path(const std::string& extension) const {
  return work_dir / ("stats." + extension);
}
std::filesystem::path RunConfig::vocab_path() const { return work_dir / "vocab.txt"; }
std::filesystem::path RunConfig::pretrain_checkpoint() const { return work_dir / "pretrain.ckpt"; }
std::filesystem::path RunConfig::loss_csv() const { return work_dir / "pretrain_loss.csv"; }
std::filesystem::path RunConfig::finetune_checkpoint() const {
  return work_dir / (std::string(classify::task_name(task)) + ".ckpt");
}
std::filesystem::path RunConfig::finetune_summary() const {
  return work_dir / ("finetune_" + std::string(classify::task_name(task)) + ".txt");
}
std::filesystem::path RunConfig::report_path(const std::string& extension) const {
  return work_dir / ("report_" + std::string(classify::task_name(task)) + "_" +
                     std::string(treebank::to_string(eval_split)) + "." + extension);
}

std::string RunConfig::to_ini() const {
  std::string out;
  out += "[paths]\nsst_dir = " + sst_dir.string() + "\nwork_dir = " + work_dir.string() + "\n\n";
  out += "[model]\npreset = " + preset + "\n\n";
  out += "[vocab]\nsize = " + std::to_string(vocab_size) + "\n\n";
  out += "[pretrain]\nepochs = " + std::to_string(pretrain.epochs) +
         "\nbatch_size = " + std::to_string(pretrain.batch_size) + "\nlr = " + number(pretrain.lr) +
         "\nwarmup_fraction = " + number(pretrain.warmup_fraction) +
         "\nmax_len = " + std::to_string(pretrain.max_len) +
         "\nmask_rate = " + number(pretrain.masking.rate) + "\n\n";
  out += "[finetune]\ntask = " + std::string(classify::task_name(task)) +
         "\nepochs = " + std::to_string(finetune.epochs) +
         "\nbatch_size = " + std::to_string(finetune.batch_size) +
         "\nlr = " + number(finetune.effective_lr()) +
         "\nwarmup_fraction = " + number(finetune.warmup_fraction) +
         "\nmax_len = " + std::to_string(finetune.max_len) +
         "\nfreeze_encoder = " + (finetune.freeze_encoder ? "true" : "false") +
         "\ntrain_scope = " + std::string(classify::scope_name(finetune.train_scope)) +
         "\nhead_dropout = " + number(finetune.head_dropout) + "\n\n";
  out += "[eval]\nscope = " + scope + "\nsplit = " + std::string(treebank::to_string(eval_split)) + "\n\n";
  out += "[run]\nseed = " + std::to_string(seed) + "\n";
  return out;
}

RunConfig load_run_config(const std::filesystem::path& path, const Overrides& overrides) {
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw ConfigError("key outside a section: " + section);
    for (const auto& [key, value] : body) {
      if (!kKnownKeys.contains(section + "." + key)) throw ConfigError("unknown key " + section + "." + key);
    }
  }

  const auto base = path.parent_path();
  const auto resolve = [&](const std::string& key) {
    const auto raw = tree.get_optional<std::string>(key);
    if (!raw || raw->empty()) throw ConfigError("missing required key " + key);
    const std::filesystem::path p(*raw);
    return (p.is_absolute() ? p : base / p).lexically_normal();
  };

  RunConfig c;
  try {
    c.sst_dir = resolve("paths.sst_dir");
    c.work_dir = resolve("paths.work_dir");
    c.preset = overrides.preset.value_or(get<std::string>(tree, "model.preset", c.preset));
    encoder::preset(c.preset);  // fail fast on unknown presets
    c.vocab_size = positive(tree, "vocab.size", c.vocab_size);

    c.seed = overrides.seed.value_or(get<std::uint64_t>(tree, "run.seed", 0));
    c.pretrain.epochs = static_cast<std::size_t>(get<long long>(tree, "pretrain.epochs", 3));
    c.pretrain.batch_size = positive(tree, "pretrain.batch_size", 32);
    c.pretrain.lr = get<double>(tree, "pretrain.lr", 1e-4);
    c.pretrain.warmup_fraction = get<double>(tree, "pretrain.warmup_fraction", 0.1);
    c.pretrain.max_len = positive(tree, "pretrain.max_len", 64);
    c.pretrain.masking.rate = get<double>(tree, "pretrain.mask_rate", 0.15);
    c.pretrain.seed = c.seed;

    c.task = classify::parse_task(overrides.task.value_or(get<std::string>(tree, "finetune.task", "sst5")));
    c.finetune.epochs = static_cast<std::size_t>(get<long long>(tree, "finetune.epochs", 3));
    c.finetune.batch_size = positive(tree, "finetune.batch_size", 32);
    if (const auto lr = tree.get_optional<std::string>("finetune.lr"); lr && !lr->empty()) {
      c.finetune.lr = get<double>(tree, "finetune.lr", 0.0);
    }
    c.finetune.warmup_fraction = get<double>(tree, "finetune.warmup_fraction", 0.1);
    c.finetune.max_len = positive(tree, "finetune.max_len", 64);
    c.finetune.freeze_encoder = get<bool>(tree, "finetune.freeze_encoder", false);
    c.finetune.train_scope = classify::parse_scope(get<std::string>(tree, "finetune.train_scope", "all"));
    c.finetune.head_dropout = get<double>(tree, "finetune.head_dropout", 0.1);
    c.finetune.seed = c.seed;

    c.scope = overrides.scope.value_or(get<std::string>(tree, "eval.scope", c.scope));
    classify::cells_for(c.task, c.scope);  // validates the list
    c.eval_split = treebank::parse_split(get<std::string>(tree, "eval.split", "dev"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  } catch (const encoder::ConfigError& e) {
    throw ConfigError(e.what());
  }

  const auto fraction = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!(c.pretrain.lr > 0.0) || (c.finetune.lr && !(*c.finetune.lr > 0.0))) {
    throw ConfigError("learning rates must be positive");
  }
  if (!fraction(c.pretrain.warmup_fraction) || !fraction(c.finetune.warmup_fraction) ||
      !fraction(c.finetune.head_dropout)) {
    throw ConfigError("warmup fractions and dropout must lie in [0, 1]");
  }
  if (!(c.pretrain.masking.rate > 0.0 && c.pretrain.masking.rate < 1.0)) {
    throw ConfigError("pretrain.mask_rate must lie in (0, 1)");
  }
  if (c.pretrain.max_len < 5 || c.finetune.max_len < 3) throw ConfigError("max_len too small");
  if (c.vocab_size <= tokenizer::Vocab::kNumSpecials) throw ConfigError("vocab.size must exceed the specials");
  return c;
}

}  // namespace sstbert::cli
