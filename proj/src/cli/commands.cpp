#include <CLI11.hpp>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "sstbert/cli/checkpoint.hpp"
#include "sstbert/cli/commands.hpp"
#include "sstbert/encoder/params.hpp"
#include "sstbert/numerics/errors.hpp"

namespace sstbert::cli {

namespace fs = std::filesystem;
namespace nx = numerics;
using numerics::Rng;
using numerics::Tensor;

namespace {

void claim_outputs(std::initializer_list<fs::path> paths, bool force) {
  for (const auto& p : paths) {
    if (fs::exists(p) && !force) {
      throw UsageError("refusing to overwrite " + p.string() + " (pass --force)");
    }
  }
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw treebank::IoError("cannot write " + path.string());
  out << text;
  if (!out) throw treebank::IoError("write failed for " + path.string());
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw treebank::IoError("cannot open " + path.string() + " (run the earlier commands first)");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

fs::path resolved_config_path(const RunConfig& config, const std::string& command) {
  return config.work_dir / (command + ".config.ini");
}

std::string fixed(double v, int digits = 6) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

tokenizer::Vocab load_vocab(const RunConfig& config) {
  if (!fs::exists(config.vocab_path())) {
    throw treebank::IoError("missing vocab " + config.vocab_path().string() + " (run vocab first)");
  }
  return tokenizer::Vocab::load(config.vocab_path());
}

encoder::ModelConfig model_config(const RunConfig& config, const tokenizer::Vocab& vocab) {
  auto c = encoder::preset(config.preset);
  // The preset fixes the architecture; the vocab file fixes V.
  c.vocab = vocab.size();
  c.validate();
  return c;
}

treebank::Corpus load_split(const RunConfig& config, treebank::Split split) {
  return treebank::load_corpus(config.sst_dir / treebank::split_file_name(split), split);
}

const Tensor<float>& require_tensor(const Checkpoint& cp, const std::string& name, const nx::Shape& shape) {
  const auto* t = nx::find_tensor(cp.tensors, name);
  if (t == nullptr) throw CheckpointError("checkpoint lacks tensor " + name);
  if (t->shape() != shape) {
    throw CheckpointError("tensor " + name + " has shape " + nx::shape_string(t->shape()) + ", expected " +
                          nx::shape_string(shape));
  }
  return *t;
}

void check_vocab(const Checkpoint& cp, const tokenizer::Vocab& vocab) {
  if (cp.config.vocab != vocab.size() || cp.get("vocab") != vocab_fingerprint(vocab.tokens())) {
    throw CheckpointError("checkpoint was built with a different vocab than " + std::to_string(vocab.size()) +
                          "-token vocab in use");
  }
}

Checkpoint pretrain_checkpoint(const objectives::PretrainState& state, const tokenizer::Vocab& vocab,
                               std::uint64_t seed, const std::string& command) {
  Checkpoint cp;
  cp.config = state.config;
  cp.provenance = {{"kind", "pretrain"},
                   {"seed", std::to_string(seed)},
                   {"step", std::to_string(state.step)},
                   {"epochs_done", std::to_string(state.epochs_done)},
                   {"adam_steps", std::to_string(state.optimizer->steps_taken())},
                   {"vocab", vocab_fingerprint(vocab.tokens())},
                   {"command", command}};
  cp.tensors = state.named();
  for (auto& t : state.optimizer->export_state()) cp.tensors.push_back(std::move(t));
  return cp;
}

objectives::PretrainState restore_pretrain(const Checkpoint& cp, const encoder::ModelConfig& config) {
  if (cp.get("kind") != "pretrain") throw CheckpointError("not a pretraining checkpoint");
  objectives::PretrainState state;
  state.config = config;
  state.encoder = encoder::params_from_table(cp.tensors, config);
  state.mlm_b = require_tensor(cp, "mlm.b", {config.vocab}).clone();
  state.nsp_w = require_tensor(cp, "nsp.w", {config.hidden, 2}).clone();
  state.nsp_b = require_tensor(cp, "nsp.b", {2}).clone();
  auto named = state.named();
  for (auto& p : named) p.tensor.set_requires_grad(true);
  state.optimizer = std::make_shared<nx::AdamW>(named, nx::AdamWConfig{});
  try {
    state.optimizer->import_state(cp.tensors, std::stoull(cp.get("adam_steps")));
    state.step = std::stoull(cp.get("step"));
    state.epochs_done = std::stoull(cp.get("epochs_done"));
  } catch (const std::logic_error& e) {
    throw CheckpointError(std::string("bad pretraining state: ") + e.what());
  }
  return state;
}

std::vector<objectives::LossRecord> parse_loss_csv(const fs::path& path) {
  std::vector<objectives::LossRecord> history;
  const auto lines = read_lines(path);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    objectives::LossRecord r;
    unsigned long long step = 0;
    if (std::sscanf(lines[i].c_str(), "%llu,%lf,%lf", &step, &r.mlm_loss, &r.nsp_loss) != 3) {
      throw treebank::IoError("malformed loss line " + std::to_string(i + 1) + " in " + path.string());
    }
    r.step = step;
    history.push_back(r);
  }
  return history;
}

classify::ClassifierModel load_classifier(const RunConfig& config, const CommandOptions& options,
                                          const tokenizer::Vocab& vocab) {
  const fs::path path = options.checkpoint.value_or(config.finetune_checkpoint());
  const Checkpoint cp = load_checkpoint(path);
  if (cp.get("kind") != "finetune") throw CheckpointError(path.string() + " is not a fine-tuned checkpoint");
  check_vocab(cp, vocab);
  const auto task = classify::parse_task(cp.get("task"));
  if (task != config.task) {
    throw classify::LabelSpaceMismatch("checkpoint is " + cp.get("task") + " but the run asks for " +
                                       std::string(classify::task_name(config.task)));
  }
  const std::size_t k = classify::num_classes(task);
  classify::ClassifierModel model;
  model.config = cp.config;
  model.task = task;
  model.encoder = encoder::params_from_table(cp.tensors, cp.config);
  model.head = {require_tensor(cp, "head.w", {cp.config.hidden, k}).clone(),
                require_tensor(cp, "head.b", {k}).clone(), config.finetune.head_dropout};
  return model;
}

}  // namespace

void cmd_prepare(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  using treebank::Split;
  const auto start = std::chrono::steady_clock::now();
  const auto corpora = treebank::load_sst_directory(config.sst_dir);
  const auto resolved = resolved_config_path(config, "prepare");
  claim_outputs({config.sentences_path(Split::train), config.sentences_path(Split::dev),
                 config.sentences_path(Split::test), config.stats_path("txt"), config.stats_path("json"), resolved},
                options.force);
  for (const auto& corpus : corpora) {
    std::string text;
    for (const auto& s : treebank::sentences(corpus)) text += s + "\n";
    write_text(config.sentences_path(corpus.split), text);
  }
  const auto stats = treebank::corpus_stats(corpora);
  write_text(config.stats_path("txt"), stats.to_text());
  write_text(config.stats_path("json"), stats.to_json());
  write_text(resolved, config.to_ini());
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << stats.to_text();
  spdlog::info("prepare finished in {:.2f} s", seconds);
}

void cmd_vocab(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  const auto sentences = read_lines(config.sentences_path(treebank::Split::train));
  const auto resolved = resolved_config_path(config, "vocab");
  claim_outputs({config.vocab_path(), resolved}, options.force);
  const auto vocab = tokenizer::build_vocab(sentences, config.vocab_size);
  fs::create_directories(config.work_dir);
  vocab.save(config.vocab_path());
  write_text(resolved, config.to_ini());
  out << "vocab " << config.vocab_path().string() << " with " << vocab.size() << " tokens\n";
}

void cmd_pretrain(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  const auto vocab = load_vocab(config);
  const auto model = model_config(config, vocab);
  if (config.pretrain.max_len > model.max_positions) {
    throw ConfigError("pretrain.max_len exceeds the preset's max_positions");
  }
  std::vector<std::vector<std::int32_t>> sentences;
  for (const auto& s : read_lines(config.sentences_path(treebank::Split::train))) {
    sentences.push_back(tokenizer::text_piece_ids(s, vocab));
  }
  const auto resolved = resolved_config_path(config, "pretrain");

  objectives::PretrainState state;
  if (options.resume) {
    const Checkpoint cp = load_checkpoint(config.pretrain_checkpoint());
    if (cp.config != model) throw CheckpointError("checkpoint config does not match preset " + config.preset);
    check_vocab(cp, vocab);
    if (cp.get("seed") != std::to_string(config.seed)) throw CheckpointError("checkpoint seed differs from run seed");
    state = restore_pretrain(cp, model);
    state.history = parse_loss_csv(config.loss_csv());
    if (state.history.size() != state.step) throw CheckpointError("loss history and checkpoint step disagree");
    spdlog::info("resuming pretraining at step {} after {} epochs", state.step, state.epochs_done);
  } else {
    claim_outputs({config.pretrain_checkpoint(), config.loss_csv(), resolved}, options.force);
    Rng rng = Rng(config.seed).fork(7);
    state = objectives::init_pretrain_state(model, rng);
  }
  fs::create_directories(config.work_dir);
  write_text(resolved, config.to_ini());

  const auto save = [&](const objectives::PretrainState& s) {
    save_checkpoint(config.pretrain_checkpoint(), pretrain_checkpoint(s, vocab, config.seed, options.command_line));
    write_text(config.loss_csv(), objectives::loss_history_csv(s.history));
  };
  objectives::pretrain(state, sentences, vocab, config.pretrain, [&](const objectives::PretrainState& s) {
    save(s);
    spdlog::info("pretrain epoch {} step {} mlm {:.4f} nsp {:.4f}", s.epochs_done, s.step,
                 s.history.back().mlm_loss, s.history.back().nsp_loss);
  });
  // Covers runs where no epoch was left to do.
  save(state);
  out << "pretrained " << state.epochs_done << " epochs, " << state.step << " steps";
  if (!state.history.empty()) {
    out << ", first mlm " << fixed(state.history.front().mlm_loss, 4) << ", last mlm "
        << fixed(state.history.back().mlm_loss, 4);
  }
  out << "\n";
}

void cmd_finetune(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  const auto vocab = load_vocab(config);
  const auto model = model_config(config, vocab);
  if (config.finetune.max_len > model.max_positions) {
    throw ConfigError("finetune.max_len exceeds the preset's max_positions");
  }
  const fs::path init = options.checkpoint.value_or(config.pretrain_checkpoint());
  const Checkpoint cp = load_checkpoint(init);
  if (cp.config != model) {
    throw CheckpointError("checkpoint " + init.string() + " has config " + encoder::describe(cp.config) +
                          ", preset " + config.preset + " needs " + encoder::describe(model));
  }
  check_vocab(cp, vocab);
  const auto resolved = resolved_config_path(config, "finetune_" + std::string(classify::task_name(config.task)));
  claim_outputs({config.finetune_checkpoint(), config.finetune_summary(), resolved}, options.force);

  const auto encoder_params = encoder::params_from_table(cp.tensors, model);
  const auto train_trees = load_split(config, treebank::Split::train).trees;
  const auto dev_trees = load_split(config, treebank::Split::dev).trees;
  const auto train = classify::project_trees(train_trees, config.task);
  const auto dev = classify::project_trees(dev_trees, config.task);
  const auto result = classify::finetune(train, dev, encoder_params, model, vocab, config.task, config.finetune);

  Checkpoint task_cp;
  task_cp.config = model;
  task_cp.provenance = {
      {"kind", "finetune"},
      {"task", std::string(classify::task_name(config.task))},
      {"seed", std::to_string(config.seed)},
      {"best_epoch", std::to_string(result.best_epoch)},
      {"best_dev_root_accuracy",
       result.best_dev_root_accuracy ? fixed(*result.best_dev_root_accuracy) : std::string("none")},
      {"freeze_encoder", config.finetune.freeze_encoder ? "true" : "false"},
      {"init", init.filename().string()},
      {"vocab", vocab_fingerprint(vocab.tokens())},
      {"command", options.command_line}};
  task_cp.tensors = result.model.named();

  std::string summary = "epoch\ttrain_loss\tdev_root_accuracy\n";
  for (const auto& r : result.history) {
    summary += std::to_string(r.epoch) + "\t" + fixed(r.train_loss) + "\t" + fixed(r.dev_root_accuracy) + "\n";
  }
  summary += "best_epoch = " + std::to_string(result.best_epoch) + "\n";
  summary += "best_dev_root_accuracy = " + task_cp.provenance["best_dev_root_accuracy"] + "\n";

  fs::create_directories(config.work_dir);
  save_checkpoint(config.finetune_checkpoint(), task_cp);
  write_text(config.finetune_summary(), summary);
  write_text(resolved, config.to_ini());
  out << summary;
}

void cmd_eval(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  const auto vocab = load_vocab(config);
  const auto model = load_classifier(config, options, vocab);
  const auto resolved = resolved_config_path(
      config, "eval_" + std::string(classify::task_name(config.task)) + "_" + std::string(treebank::to_string(config.eval_split)));
  claim_outputs({config.report_path("tsv"), config.report_path("json"), resolved}, options.force);
  const auto trees = load_split(config, config.eval_split).trees;
  const auto cells = classify::cells_for(config.task, config.scope);
  const auto report = classify::evaluate(model, vocab, trees, cells, config.finetune.max_len,
                                         std::string(treebank::to_string(config.eval_split)));
  write_text(config.report_path("tsv"), report.to_tsv());
  write_text(config.report_path("json"), report.to_json());
  write_text(resolved, config.to_ini());
  out << report.to_tsv();
}

void cmd_predict(const RunConfig& config, const CommandOptions& options, std::ostream& out) {
  if (!options.text) throw UsageError("predict needs --text");
  const auto vocab = load_vocab(config);
  const auto model = load_classifier(config, options, vocab);
  if (tokenizer::canonical_words(*options.text).empty()) {
    spdlog::warn("text has no words after canonicalization; predicting on [CLS] [SEP] alone");
  }
  const std::vector<std::string> texts{*options.text};
  const auto p = classify::predict(model, vocab, texts, config.finetune.max_len).front();
  out << "label\t" << classify::class_name(model.task, p.label) << "\n";
  for (std::size_t k = 0; k < p.probs.size(); ++k) {
    out << classify::class_name(model.task, static_cast<int>(k)) << "\t" << fixed(p.probs[k], 3) << "\n";
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  if (!spdlog::get("sstbert")) spdlog::set_default_logger(spdlog::stderr_logger_mt("sstbert"));

  CLI::App app{"Sentiment treebank encoder pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> preset, task, scope, text, checkpoint;
  CommandOptions options;
  app.add_option("--config", config_path, "run configuration file")->required();
  app.add_option("--seed", seed, "override run.seed");
  app.add_option("--preset", preset, "base, large or toy")->check(CLI::IsMember({"base", "large", "toy"}));
  app.add_option("--task", task, "sst2 or sst5")->check(CLI::IsMember({"sst2", "sst5"}));
  app.add_option("--scope", scope, "comma list of all, root");
  app.add_flag("--force", options.force, "overwrite existing outputs");
  app.add_flag("--resume", options.resume, "pretrain: continue from the saved checkpoint");
  app.add_option("--text", text, "predict: input text");
  app.add_option("--checkpoint", checkpoint, "checkpoint to start from or evaluate");
  app.fallthrough();

  using Command = void (*)(const RunConfig&, const CommandOptions&, std::ostream&);
  const std::vector<std::pair<std::string, Command>> commands = {
      {"prepare", cmd_prepare},   {"vocab", cmd_vocab}, {"pretrain", cmd_pretrain},
      {"finetune", cmd_finetune}, {"eval", cmd_eval},   {"predict", cmd_predict}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name, name + " step");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  std::string line = "sstbert";
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (i > 1 && std::string(argv[i - 1]) == "--config") arg = fs::path(arg).filename().string();
    line += " " + arg;
  }
  options.command_line = line;
  options.text = text;
  if (checkpoint) options.checkpoint = fs::path(*checkpoint);

  try {
    const RunConfig config = load_run_config(config_path, {seed, preset, task, scope});
    for (const auto& [name, fn] : commands) {
      if (app.got_subcommand(name)) fn(config, options, out);
    }
    return kExitOk;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nx::ShapeMismatch& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nx::IndexOutOfRange& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const nx::NumericsError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  }
}

}  // namespace sstbert::cli
