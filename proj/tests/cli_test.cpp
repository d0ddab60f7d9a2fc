#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "sstbert/cli/checkpoint.hpp"
#include "sstbert/cli/commands.hpp"
#include "sstbert/cli/run_config.hpp"
#include "support/synthetic.hpp"

namespace cli = sstbert::cli;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "sstbert");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

std::string config_text(const fs::path& sst, const std::string& extra = "") {
  return "[paths]\nsst_dir = " + sst.string() +
         "\nwork_dir = work\n\n[model]\npreset = toy\n\n[vocab]\nsize = 120\n\n"
         "[pretrain]\nepochs = 1\nbatch_size = 16\nlr = 1e-3\nmax_len = 32\n\n"
         "[finetune]\ntask = sst5\nepochs = 2\nbatch_size = 16\nlr = 1e-3\nmax_len = 32\ntrain_scope = root\n\n"
         "[run]\nseed = 9\n" +
         extra;
}

/// A run directory holding run.ini over a shared synthetic treebank.
struct RunDir {
  fs::path dir;
  fs::path config;

  RunDir(const std::string& tag, const fs::path& sst, const std::string& extra = "") {
    dir = sstbert::testing::scratch_dir(tag);
    config = dir / "run.ini";
    spit(config, config_text(sst, extra));
  }

  fs::path work() const { return dir / "work"; }

  Result step(const std::string& command, std::vector<std::string> extra = {}) const {
    std::vector<std::string> args{command, "--config", config.string()};
    args.insert(args.end(), extra.begin(), extra.end());
    return run(args);
  }

  void pipeline() const {
    for (const char* c : {"prepare", "vocab", "pretrain", "finetune", "eval"}) {
      const auto r = step(c);
      ASSERT_EQ(r.code, 0) << c << ": " << r.err;
    }
  }
};

const fs::path& shared_sst() {
  static const fs::path dir = [] {
    auto d = sstbert::testing::scratch_dir("cli_sst");
    sstbert::testing::write_synthetic_sst(d, 60, 20, 20, 31);
    return d;
  }();
  return dir;
}

}  // namespace

TEST(RunConfig, ResolvesAndValidates) {
  const RunDir r("cli_config", shared_sst());
  const auto c = cli::load_run_config(r.config, {std::uint64_t{5}, std::string("toy"), std::string("sst2"), std::nullopt});
  EXPECT_EQ(c.work_dir, (r.dir / "work").lexically_normal());
  EXPECT_EQ(c.seed, 5u);
  EXPECT_EQ(c.pretrain.seed, 5u);
  EXPECT_EQ(c.task, sstbert::classify::Task::sst2);
  EXPECT_EQ(c.finetune.train_scope, sstbert::classify::Scope::root);
  // The resolved copy reloads to the same values.
  spit(r.dir / "again.ini", c.to_ini());
  EXPECT_EQ(cli::load_run_config(r.dir / "again.ini").to_ini(), c.to_ini());

  spit(r.dir / "bad.ini", config_text(shared_sst(), "colour = blue\n"));
  EXPECT_THROW(cli::load_run_config(r.dir / "bad.ini"), cli::ConfigError);
  spit(r.dir / "bad2.ini", "[paths]\nsst_dir = x\n");
  EXPECT_THROW(cli::load_run_config(r.dir / "bad2.ini"), cli::ConfigError);
  spit(r.dir / "bad3.ini", config_text(shared_sst(), "[eval]\nscope = all,leaf\n"));
  EXPECT_THROW(cli::load_run_config(r.dir / "bad3.ini"), cli::ConfigError);
}

TEST(Cli, UsageErrors) {
  const RunDir r("cli_usage", shared_sst());
  EXPECT_EQ(run({"prepare"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--config", r.config.string()}).code, cli::kExitUsage);
  EXPECT_EQ(r.step("prepare", {"--preset", "huge"}).code, cli::kExitUsage);
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
  spit(r.dir / "odd.ini", config_text(shared_sst(), "[vocab]\nflavour = 3\n"));
  EXPECT_EQ(run({"prepare", "--config", (r.dir / "odd.ini").string()}).code, cli::kExitUsage);
}

TEST(Cli, PrepareNamesMissingFile) {
  const auto sst = sstbert::testing::scratch_dir("cli_missing_sst");
  sstbert::testing::write_synthetic_sst(sst, 5, 2, 2, 1);
  fs::remove(sst / "dev.txt");
  const RunDir r("cli_missing", sst);
  const auto result = r.step("prepare");
  EXPECT_EQ(result.code, cli::kExitData);
  EXPECT_NE(result.err.find("dev"), std::string::npos) << result.err;
}

TEST(Cli, FullPipelineArtifactsAndGuards) {
  const RunDir r("cli_pipeline", shared_sst());
  r.pipeline();
  for (const char* name : {"sentences.train.txt", "stats.txt", "stats.json", "vocab.txt", "pretrain.ckpt",
                           "pretrain_loss.csv", "sst5.ckpt", "finetune_sst5.txt", "report_sst5_dev.tsv",
                           "report_sst5_dev.json", "prepare.config.ini", "eval_sst5_dev.config.ini", "finetune_sst5.config.ini"}) {
    EXPECT_TRUE(fs::exists(r.work() / name)) << name;
  }

  // Vocab: exact size, specials first.
  std::istringstream vocab(slurp(r.work() / "vocab.txt"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(vocab, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 120u);
  EXPECT_EQ(std::vector<std::string>(lines.begin(), lines.begin() + 5),
            (std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}));

  // No silent overwrite; --force reruns byte-identically.
  const std::string before = slurp(r.work() / "vocab.txt");
  EXPECT_EQ(r.step("vocab").code, cli::kExitUsage);
  EXPECT_EQ(r.step("prepare").code, cli::kExitUsage);
  EXPECT_EQ(r.step("vocab", {"--force"}).code, cli::kExitOk);
  EXPECT_EQ(slurp(r.work() / "vocab.txt"), before);
  const std::string stats = slurp(r.work() / "stats.json");
  EXPECT_EQ(r.step("prepare", {"--force"}).code, cli::kExitOk);
  EXPECT_EQ(slurp(r.work() / "stats.json"), stats);

  // Report: JSON and TSV agree; only requested cells.
  const auto j = nlohmann::json::parse(slurp(r.work() / "report_sst5_dev.json"));
  const std::string tsv = slurp(r.work() / "report_sst5_dev.tsv");
  for (const auto& cell : j["cells"]) {
    const std::string row = cell["task"].get<std::string>() + "\t" + cell["scope"].get<std::string>() + "\t" +
                            std::to_string(cell["n"].get<int>()) + "\t" + cell["percent"].get<std::string>() + "\n";
    EXPECT_NE(tsv.find(row), std::string::npos) << row;
  }
  const auto root_only = r.step("eval", {"--scope", "root", "--force"});
  ASSERT_EQ(root_only.code, 0) << root_only.err;
  EXPECT_EQ(root_only.out.find("\tall\t"), std::string::npos);
  EXPECT_NE(root_only.out.find("sst5\troot\t20\t"), std::string::npos);

  // Predict: normalized, repeatable, tolerant of empty text.
  const auto p1 = r.step("predict", {"--text", "a truly great film"});
  const auto p2 = r.step("predict", {"--text", "a truly great film"});
  ASSERT_EQ(p1.code, 0) << p1.err;
  EXPECT_EQ(p1.out, p2.out);
  std::istringstream pout(p1.out);
  std::string line;
  std::getline(pout, line);
  EXPECT_EQ(line.rfind("label\t", 0), 0u);
  double total = 0.0;
  int classes = 0;
  while (std::getline(pout, line)) {
    total += std::stod(line.substr(line.find('\t') + 1));
    ++classes;
  }
  EXPECT_EQ(classes, 5);
  EXPECT_NEAR(total, 1.0, 0.001 + 1e-9);
  const auto empty = r.step("predict", {"--text", ""});
  EXPECT_EQ(empty.code, 0);
  EXPECT_EQ(r.step("predict").code, cli::kExitUsage);
}

TEST(Cli, CheckpointRoundTripAndVersionGuard) {
  const RunDir r("cli_ckpt", shared_sst());
  r.pipeline();
  for (const char* name : {"pretrain.ckpt", "sst5.ckpt"}) {
    const auto path = r.work() / name;
    const auto cp = cli::load_checkpoint(path);
    cli::save_checkpoint(r.dir / "copy.ckpt", cp);
    EXPECT_EQ(slurp(r.dir / "copy.ckpt"), slurp(path)) << name;
  }
  const auto cp = cli::load_checkpoint(r.work() / "pretrain.ckpt");
  EXPECT_EQ(cp.get("kind"), "pretrain");
  EXPECT_NE(sstbert::numerics::find_tensor(cp.tensors, "adam.m.emb.tok"), nullptr);
  EXPECT_NE(sstbert::numerics::find_tensor(cp.tensors, "nsp.w"), nullptr);
  EXPECT_EQ(cli::load_checkpoint(r.work() / "sst5.ckpt").get("task"), "sst5");

  std::string bytes = slurp(r.work() / "sst5.ckpt");
  bytes[4] = 2;
  spit(r.dir / "v2.ckpt", bytes);
  EXPECT_THROW(cli::load_checkpoint(r.dir / "v2.ckpt"), cli::VersionMismatch);
  EXPECT_EQ(r.step("eval", {"--checkpoint", (r.dir / "v2.ckpt").string(), "--force"}).code, cli::kExitData);
  spit(r.dir / "junk.ckpt", "nope");
  EXPECT_THROW(cli::load_checkpoint(r.dir / "junk.ckpt"), cli::CheckpointError);
}

TEST(Cli, FinetuneGuardsAndTasks) {
  const RunDir r("cli_tasks", shared_sst());
  r.pipeline();
  const auto mismatch = r.step("finetune", {"--preset", "base", "--force"});
  EXPECT_EQ(mismatch.code, cli::kExitData);
  EXPECT_NE(mismatch.err.find("preset base"), std::string::npos) << mismatch.err;
  const auto sst2 = r.step("finetune", {"--task", "sst2"});
  ASSERT_EQ(sst2.code, 0) << sst2.err;
  EXPECT_NE(sst2.out.find("best_epoch = "), std::string::npos);
  EXPECT_TRUE(fs::exists(r.work() / "sst2.ckpt"));
  EXPECT_EQ(r.step("eval", {"--task", "sst2"}).code, 0);
  // A sst5 checkpoint cannot answer sst2 cells.
  EXPECT_EQ(r.step("eval", {"--task", "sst2", "--checkpoint", (r.work() / "sst5.ckpt").string(), "--force"}).code,
            cli::kExitData);
}

TEST(Cli, OracleCheckpointScoresHundred) {
  const RunDir r("cli_oracle", shared_sst());
  r.pipeline();
  auto cp = cli::load_checkpoint(r.work() / "sst5.ckpt");
  for (auto& t : cp.tensors) {
    if (t.name == "head.w") std::fill(t.tensor.values().begin(), t.tensor.values().end(), 0.0f);
    if (t.name == "head.b") t.tensor.values()[4] = 50.0f;
  }
  cli::save_checkpoint(r.dir / "oracle.ckpt", cp);
  const auto sst = r.dir / "positive_sst";
  spit(sst / "train.txt", "(4 good)\n");
  spit(sst / "dev.txt", "(4 (4 great) (4 fun))\n(4 wow)\n");
  spit(sst / "test.txt", "(4 good)\n");
  spit(r.dir / "oracle.ini", config_text(sst));
  const auto result = run({"eval", "--config", (r.dir / "oracle.ini").string(), "--checkpoint",
                           (r.dir / "oracle.ckpt").string(), "--force"});
  ASSERT_EQ(result.code, 0) << result.err;
  EXPECT_NE(result.out.find("sst5\tall\t4\t100.0\n"), std::string::npos) << result.out;
  EXPECT_NE(result.out.find("sst5\troot\t2\t100.0\n"), std::string::npos) << result.out;
}

TEST(Cli, PretrainResumeContinuesStepCounter) {
  const RunDir r("cli_resume", shared_sst());
  for (const char* c : {"prepare", "vocab", "pretrain"}) ASSERT_EQ(r.step(c).code, 0) << c;
  const auto first = cli::load_checkpoint(r.work() / "pretrain.ckpt");
  const auto steps = std::stoull(first.get("step"));
  ASSERT_GT(steps, 0u);
  EXPECT_EQ(r.step("pretrain").code, cli::kExitUsage);

  spit(r.config, config_text(shared_sst(), "").replace(config_text(shared_sst()).find("epochs = 1"), 10, "epochs = 2"));
  const auto resumed = r.step("pretrain", {"--resume"});
  ASSERT_EQ(resumed.code, 0) << resumed.err;
  const auto second = cli::load_checkpoint(r.work() / "pretrain.ckpt");
  EXPECT_EQ(std::stoull(second.get("step")), 2 * steps);
  EXPECT_EQ(second.get("epochs_done"), "2");
  std::istringstream csv(slurp(r.work() / "pretrain_loss.csv"));
  std::string line;
  std::getline(csv, line);
  for (unsigned long long expect = 1; std::getline(csv, line); ++expect) {
    EXPECT_EQ(std::stoull(line.substr(0, line.find(','))), expect);
  }
  EXPECT_EQ(r.step("pretrain", {"--resume", "--seed", "10"}).code, cli::kExitData);
}

TEST(Cli, IdenticalRunsAreByteIdentical) {
  const RunDir a("cli_det_a", shared_sst()), b("cli_det_b", shared_sst());
  a.pipeline();
  b.pipeline();
  for (const char* name : {"vocab.txt", "pretrain.ckpt", "pretrain_loss.csv", "sst5.ckpt", "finetune_sst5.txt",
                           "report_sst5_dev.tsv", "report_sst5_dev.json", "stats.json"}) {
    EXPECT_EQ(slurp(a.work() / name), slurp(b.work() / name)) << name;
  }
}

TEST(Cli, NumericBlowUpExitsThree) {
  const RunDir r("cli_numeric", shared_sst());
  ASSERT_EQ(r.step("prepare").code, 0);
  ASSERT_EQ(r.step("vocab").code, 0);
  auto text = config_text(shared_sst());
  text.replace(text.find("lr = 1e-3"), 9, "lr = 1e+38");
  spit(r.config, text);
  const auto result = r.step("pretrain");
  EXPECT_EQ(result.code, cli::kExitNumeric) << result.err;
}
