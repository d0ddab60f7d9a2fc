#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sstbert/numerics/errors.hpp"
#include "sstbert/numerics/tape.hpp"
#include "sstbert/objectives/objectives.hpp"
#include "sstbert/treebank/phrase_tree.hpp"
#include "support/synthetic.hpp"

namespace ob = sstbert::objectives;
namespace tk = sstbert::tokenizer;
using sstbert::encoder::ModelConfig;
using sstbert::numerics::Rng;
using tk::Vocab;

namespace {

/// Specials then `plain` single-letter-ish words then `cont` continuations.
Vocab letter_vocab(std::size_t plain, std::size_t cont = 0) {
  std::vector<std::string> tokens(Vocab::kSpecials.begin(), Vocab::kSpecials.end());
  for (std::size_t i = 0; i < plain; ++i) tokens.push_back("w" + std::to_string(i));
  for (std::size_t i = 0; i < cont; ++i) tokens.push_back("##c" + std::to_string(i));
  return Vocab(tokens);
}

std::vector<std::int32_t> ordinary_ids(std::size_t count, std::size_t vocab_plain, Rng& rng) {
  std::vector<std::int32_t> ids(count);
  for (auto& id : ids) id = static_cast<std::int32_t>(Vocab::kNumSpecials + rng.below(vocab_plain));
  return ids;
}

ModelConfig small_config(std::size_t vocab, std::size_t hidden = 32) {
  ModelConfig c;
  c.layers = 2;
  c.hidden = hidden;
  c.heads = 2;
  c.intermediate = hidden * 2;
  c.vocab = vocab;
  c.max_positions = 64;
  c.dropout_p = 0.1;
  c.validate();
  return c;
}

struct EvalLosses {
  double mlm = 0.0;
  double nsp = 0.0;
  double nsp_accuracy = 0.0;
};

EvalLosses eval_losses(const ob::PretrainState& state, std::span<const ob::PretrainExample> examples) {
  const auto losses = ob::pretrain_losses<float>(state.encoder, state.mlm_b, state.nsp_w, state.nsp_b,
                                                 state.config, examples, false, nullptr);
  return {losses.mlm.item(), losses.nsp.item(),
          static_cast<double>(losses.nsp_correct) / static_cast<double>(examples.size())};
}

std::vector<std::vector<std::int32_t>> uniform_sentences(std::size_t count, std::size_t length,
                                                         std::size_t plain, Rng& rng) {
  std::vector<std::vector<std::int32_t>> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(ordinary_ids(length, plain, rng));
  return out;
}

}  // namespace

TEST(MaskTokens, SelectedFractionMatchesRate) {
  const Vocab vocab = letter_vocab(40);
  Rng rng(11);
  std::size_t maskable = 0, selected = 0;
  for (int s = 0; s < 100; ++s) {
    const auto seq = tk::frame_single(ordinary_ids(1000, 40, rng), 1002);
    const auto masked = ob::mask_tokens(seq, vocab, rng);
    maskable += 1000;
    selected += masked.positions.size();
  }
  ASSERT_EQ(maskable, 100000u);
  EXPECT_NEAR(static_cast<double>(selected) / static_cast<double>(maskable), 0.15, 0.005);
}

TEST(MaskTokens, ReplacementShares) {
  const Vocab vocab = letter_vocab(400);
  Rng rng(12);
  std::size_t total = 0, to_mask = 0, kept = 0;
  for (int s = 0; s < 100; ++s) {
    const auto seq = tk::frame_single(ordinary_ids(1000, 400, rng), 1002);
    const auto masked = ob::mask_tokens(seq, vocab, rng);
    for (std::size_t p : masked.positions) {
      ++total;
      if (masked.seq.ids[p] == Vocab::kMask) ++to_mask;
      if (masked.seq.ids[p] == seq.ids[p]) ++kept;
    }
  }
  const double n = static_cast<double>(total);
  EXPECT_NEAR(to_mask / n, 0.8, 0.01);
  // Random replacements coincide with the original 1/400 of the time.
  EXPECT_NEAR(kept / n, 0.1 + 0.1 / 400.0, 0.01);
}

TEST(MaskTokens, SingleMaskableTokenIsForced) {
  const Vocab vocab = letter_vocab(3);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto masked = ob::mask_tokens(tk::frame_single({5}, 8), vocab, rng);
    ASSERT_EQ(masked.positions, std::vector<std::size_t>{1});
    EXPECT_EQ(masked.targets[1], 5);
  }
}

TEST(MaskTokens, Errors) {
  const Vocab vocab = letter_vocab(3);
  Rng rng(1);
  EXPECT_THROW(ob::mask_tokens(tk::frame_single({}, 8), vocab, rng), ob::NoMaskablePositions);
  const auto seq = tk::frame_single({5, 6}, 8);
  EXPECT_THROW(ob::mask_tokens(seq, vocab, rng, {0.0, 0.8, 0.1}), std::invalid_argument);
  EXPECT_THROW(ob::mask_tokens(seq, vocab, rng, {1.0, 0.8, 0.1}), std::invalid_argument);
}

TEST(MaskTokens, InvariantsOverRandomSequences) {
  const Vocab vocab = letter_vocab(20, 10);
  Rng rng(13);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t max_len = 5 + rng.below(28);
    const bool pair = rng.bernoulli(0.5);
    auto a = ordinary_ids(1 + rng.below(12), 30, rng);
    auto b = ordinary_ids(1 + rng.below(12), 30, rng);
    const auto seq = pair ? tk::frame_pair(a, b, max_len) : tk::frame_single(a, max_len);
    const auto masked = ob::mask_tokens(seq, vocab, rng);
    ASSERT_FALSE(masked.positions.empty());
    auto restored = masked.seq;
    for (std::size_t i = 0; i < seq.max_len(); ++i) {
      const bool at_position =
          std::find(masked.positions.begin(), masked.positions.end(), i) != masked.positions.end();
      ASSERT_EQ(masked.targets[i] != ob::kNotPredicted, at_position);
      if (!at_position) {
        ASSERT_EQ(masked.seq.ids[i], seq.ids[i]);
        continue;
      }
      ASSERT_NE(seq.ids[i], Vocab::kCls);
      ASSERT_NE(seq.ids[i], Vocab::kSep);
      ASSERT_NE(seq.ids[i], Vocab::kPad);
      ASSERT_EQ(seq.mask[i], 1);
      restored.ids[i] = masked.targets[i];
    }
    ASSERT_EQ(restored.ids, seq.ids);
    ASSERT_EQ(masked.seq.segment_ids, seq.segment_ids);
    ASSERT_EQ(masked.seq.mask, seq.mask);
  }
}

TEST(MaskTokens, WordsAreSelectedWhole) {
  // Ids 5..9 start words, 10..14 are continuations.
  const Vocab vocab = letter_vocab(5, 5);
  Rng rng(14);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::int32_t> pieces;
    for (int w = 0; w < 6; ++w) {
      pieces.push_back(static_cast<std::int32_t>(5 + rng.below(5)));
      for (std::uint64_t c = rng.below(3); c > 0; --c) pieces.push_back(static_cast<std::int32_t>(10 + rng.below(5)));
    }
    const auto seq = tk::frame_single(pieces, pieces.size() + 2);
    const auto masked = ob::mask_tokens(seq, vocab, rng);
    for (std::size_t i = 2; i + 1 < seq.max_len(); ++i) {
      if (vocab.is_continuation(seq.ids[i])) {
        ASSERT_EQ(masked.targets[i] != ob::kNotPredicted, masked.targets[i - 1] != ob::kNotPredicted);
      }
    }
  }
}

TEST(MakeNspPairs, ForcedNextOnTwoSentences) {
  const std::vector<std::vector<std::int32_t>> sentences{{5, 6}, {7}};
  Rng rng(3);
  const auto pairs = ob::make_nsp_pairs(sentences, 16, rng, 1.0);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_TRUE(pairs[0].is_next);
  EXPECT_EQ(pairs[0].seq.ids, tk::frame_pair({5, 6}, {7}, 16).ids);
  EXPECT_EQ(pairs[0].seq.segment_ids, tk::frame_pair({5, 6}, {7}, 16).segment_ids);
}

TEST(MakeNspPairs, TooSmall) {
  const std::vector<std::vector<std::int32_t>> one{{5}};
  Rng rng(1);
  EXPECT_THROW(ob::make_nsp_pairs(one, 16, rng), ob::CorpusTooSmall);
}

TEST(MakeNspPairs, LabelBalance) {
  Rng data(21), rng(22);
  const auto sentences = uniform_sentences(10001, 3, 50, data);
  const auto pairs = ob::make_nsp_pairs(sentences, 16, rng);
  ASSERT_EQ(pairs.size(), 10000u);
  const auto next = std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.is_next; });
  const double fraction = static_cast<double>(next) / 10000.0;
  EXPECT_GE(fraction, 0.48);
  EXPECT_LE(fraction, 0.52);
}

TEST(MakeNspPairs, RandomSecondIsNeverTheTrueNext) {
  Rng data(23), rng(24);
  // Small alphabet so textual duplicates are common.
  const auto sentences = uniform_sentences(2000, 1, 4, data);
  const auto pairs = ob::make_nsp_pairs(sentences, 8, rng, 0.0);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& seq = pairs[i].seq;
    EXPECT_FALSE(pairs[i].is_next);
    ASSERT_EQ(seq.n_real, 5u);
    EXPECT_NE(seq.ids[3], sentences[i + 1][0]) << "pair " << i;
    EXPECT_EQ(tk::check_sequence(seq, true), "");
    EXPECT_EQ(seq.segment_ids[1], 0);
    EXPECT_EQ(seq.segment_ids[3], 1);
  }
}

TEST(MakeNspPairs, TextFrontEnd) {
  const Vocab vocab(std::vector<std::string>{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "it", "rocks"});
  const std::vector<std::string> text{"It rocks", "rocks"};
  Rng rng(2);
  const auto pairs = ob::make_nsp_pairs(text, vocab, 16, rng, 1.0);
  ASSERT_EQ(pairs.size(), 1u);
  EXPECT_EQ(std::vector<std::int32_t>(pairs[0].seq.ids.begin(), pairs[0].seq.ids.begin() + 6),
            (std::vector<std::int32_t>{Vocab::kCls, 5, 6, Vocab::kSep, 6, Vocab::kSep}));
}

TEST(PretrainStep, AllUnknownBatchStaysFinite) {
  const Vocab vocab = letter_vocab(10);
  const auto config = small_config(vocab.size());
  Rng rng(31);
  auto state = ob::init_pretrain_state(config, rng);
  std::vector<std::vector<std::int32_t>> sentences(9, std::vector<std::int32_t>(6, Vocab::kUnk));
  Rng ex_rng(32);
  const auto examples = ob::make_examples(sentences, vocab, 16, ex_rng);
  ASSERT_EQ(examples.size(), 8u);
  Rng drop(33);
  for (int i = 0; i < 3; ++i) {
    const auto r = ob::pretrain_step(state, examples, 1e-3, drop);
    EXPECT_TRUE(std::isfinite(r.mlm_loss));
    EXPECT_TRUE(std::isfinite(r.nsp_loss));
  }
  for (const auto& p : state.named()) {
    for (float v : p.tensor.values()) ASSERT_TRUE(std::isfinite(v)) << p.name;
  }
  EXPECT_EQ(state.step, 3u);
  ASSERT_EQ(state.history.size(), 3u);
  EXPECT_EQ(state.history[2].step, 3u);
}

TEST(PretrainStep, OverfitsFixedBatch) {
  const Vocab vocab = letter_vocab(30);
  const auto config = small_config(vocab.size());
  Rng rng(41), data(42), ex_rng(43), drop(44);
  auto state = ob::init_pretrain_state(config, rng);
  const auto sentences = uniform_sentences(9, 6, 30, data);
  const auto examples = ob::make_examples(sentences, vocab, 16, ex_rng);
  const double initial = eval_losses(state, examples).mlm;
  bool dropped = false;
  for (int i = 0; i < 200 && !dropped; ++i) {
    ob::pretrain_step(state, examples, 1e-3, drop);
    dropped = eval_losses(state, examples).mlm < initial;
  }
  EXPECT_TRUE(dropped) << "mlm loss never fell below " << initial;
  // Well past the first improvement the batch is memorized.
  for (int i = 0; i < 150; ++i) ob::pretrain_step(state, examples, 1e-3, drop);
  EXPECT_LT(eval_losses(state, examples).mlm, 0.5 * initial);
}

TEST(PretrainStep, NextSentenceSeparableCorpus) {
  // Two unrelated texts, interleaved in blocks. Within a text, sentence k
  // reads (c_k, c_k+1, c_k+2) over a cycle of that text's tokens, so "B
  // follows A" holds exactly when B starts where A's second token points.
  const std::size_t cycle = 7;
  const Vocab vocab = letter_vocab(2 * cycle);
  std::vector<std::vector<std::int32_t>> sentences;
  for (std::size_t block = 0; block < 24; ++block) {
    const std::int32_t base = Vocab::kNumSpecials + static_cast<std::int32_t>((block % 2) * cycle);
    for (std::size_t k = 0; k < 12; ++k) {
      const std::size_t start = (block * 5 + k) % cycle;
      std::vector<std::int32_t> s;
      for (std::size_t j = 0; j < 3; ++j) s.push_back(base + static_cast<std::int32_t>((start + j) % cycle));
      sentences.push_back(s);
    }
  }
  const auto config = small_config(vocab.size());
  Rng rng(51), ex_rng(52), drop(53), order_rng(54);
  auto state = ob::init_pretrain_state(config, rng);
  // Masking here only perturbs; the relation is carried by several tokens.
  const auto examples = ob::make_examples(sentences, vocab, 12, ex_rng, {0.15, 0.8, 0.1});
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < 100; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[order_rng.below(i)]);
    for (std::size_t start = 0; start < order.size(); start += 32) {
      std::vector<ob::PretrainExample> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + 32); ++i) batch.push_back(examples[order[i]]);
      ob::pretrain_step(state, batch, 2e-3, drop);
    }
  }
  EXPECT_GT(eval_losses(state, examples).nsp_accuracy, 0.9);
}

TEST(PretrainStep, UniformCorpusMlmLossSettlesAtLogV) {
  // Mask-only replacement: an unchanged or random-token input would let the
  // visible identity leak into the target.
  const std::size_t plain = 40;
  const Vocab vocab = letter_vocab(plain);
  const auto config = small_config(vocab.size());
  const ob::MaskingConfig mask_only{0.15, 1.0, 0.0};
  Rng rng(61), data(62), ex_rng(63), drop(64), held(65), held_ex(66);
  auto state = ob::init_pretrain_state(config, rng);
  const auto train = ob::make_examples(uniform_sentences(1601, 8, plain, data), vocab, 20, ex_rng, mask_only);
  const auto test = ob::make_examples(uniform_sentences(257, 8, plain, held), vocab, 20, held_ex, mask_only);
  for (int epoch = 0; epoch < 3; ++epoch) {
    for (std::size_t start = 0; start < train.size(); start += 32) {
      const auto end = std::min(train.size(), start + 32);
      ob::pretrain_step(state, std::span(train).subspan(start, end - start), 1e-3, drop);
    }
  }
  const double expected = std::log(static_cast<double>(plain));
  const double loss = eval_losses(state, test).mlm;
  EXPECT_NEAR(loss, expected, 0.05 * expected);
  EXPECT_GT(loss, 0.95 * expected);
}

TEST(PretrainStep, ShuffledNspLabelsStayAtLogTwo) {
  const Vocab vocab = letter_vocab(30);
  const auto config = small_config(vocab.size());
  Rng rng(71), data(72), ex_rng(73), drop(74), labels(75);
  auto state = ob::init_pretrain_state(config, rng);
  auto examples = ob::make_examples(uniform_sentences(1281, 5, 30, data), vocab, 16, ex_rng);
  for (auto& ex : examples) ex.is_next = labels.bernoulli(0.5);
  const auto train = std::span(examples).subspan(0, 1024);
  const auto test = std::span(examples).subspan(1024);
  for (int epoch = 0; epoch < 3; ++epoch) {
    for (std::size_t start = 0; start < train.size(); start += 32) {
      ob::pretrain_step(state, train.subspan(start, 32), 1e-3, drop);
    }
  }
  const double expected = std::log(2.0);
  EXPECT_NEAR(eval_losses(state, test).nsp, expected, 0.05 * expected);
}

namespace {

struct PretrainFixture {
  Vocab vocab;
  std::vector<std::vector<std::int32_t>> sentences;
  ModelConfig config;
  ob::PretrainHyper hyper;

  PretrainFixture() {
    std::vector<std::string> text;
    for (const auto& tree : sstbert::testing::synthetic_trees(120, 81)) text.push_back(tree.span_text());
    vocab = tk::build_vocab(text, 120);
    for (const auto& t : text) sentences.push_back(tk::text_piece_ids(t, vocab));
    config = small_config(vocab.size());
    hyper.epochs = 2;
    hyper.batch_size = 16;
    hyper.lr = 1e-3;
    hyper.max_len = 32;
    hyper.seed = 82;
  }

  ob::PretrainState fresh() const {
    Rng rng(hyper.seed);
    return ob::init_pretrain_state(config, rng);
  }
};

void expect_same_params(const ob::PretrainState& a, const ob::PretrainState& b) {
  const auto na = a.named(), nb = b.named();
  ASSERT_EQ(na.size(), nb.size());
  for (std::size_t i = 0; i < na.size(); ++i) {
    ASSERT_EQ(na[i].name, nb[i].name);
    ASSERT_TRUE(std::equal(na[i].tensor.values().begin(), na[i].tensor.values().end(),
                           nb[i].tensor.values().begin()))
        << na[i].name;
  }
}

}  // namespace

TEST(Pretrain, SeedFixedRunsAreIdentical) {
  const PretrainFixture f;
  auto a = f.fresh(), b = f.fresh();
  ob::pretrain(a, f.sentences, f.vocab, f.hyper);
  ob::pretrain(b, f.sentences, f.vocab, f.hyper);
  EXPECT_EQ(ob::loss_history_csv(a.history), ob::loss_history_csv(b.history));
  expect_same_params(a, b);
  for (std::size_t i = 1; i < a.history.size(); ++i) EXPECT_EQ(a.history[i].step, a.history[i - 1].step + 1);
}

TEST(Pretrain, ZeroEpochsLeavesStateUnchanged) {
  PretrainFixture f;
  f.hyper.epochs = 0;
  auto a = f.fresh();
  const auto b = f.fresh();
  ob::pretrain(a, f.sentences, f.vocab, f.hyper);
  EXPECT_EQ(a.step, 0u);
  EXPECT_TRUE(a.history.empty());
  expect_same_params(a, b);
}

TEST(Pretrain, ResumedRunRetracesUninterrupted) {
  PretrainFixture f;
  auto whole = f.fresh();
  ob::pretrain(whole, f.sentences, f.vocab, f.hyper);

  auto resumed = f.fresh();
  struct Interrupt {};
  EXPECT_THROW(ob::pretrain(resumed, f.sentences, f.vocab, f.hyper,
                            [](const ob::PretrainState&) { throw Interrupt{}; }),
               Interrupt);
  EXPECT_EQ(resumed.epochs_done, 1u);
  ob::pretrain(resumed, f.sentences, f.vocab, f.hyper);
  EXPECT_EQ(resumed.step, whole.step);
  EXPECT_EQ(ob::loss_history_csv(resumed.history), ob::loss_history_csv(whole.history));
  expect_same_params(resumed, whole);
}

TEST(Pretrain, MlmLossFallsOnTreebankSentences) {
  // The synthetic lexicon has 36 words, so its unigram entropy caps how far
  // the loss can fall from ln V in a few epochs.
  std::vector<std::string> text;
  for (const auto& tree : sstbert::testing::synthetic_trees(1000, 81)) text.push_back(tree.span_text());
  const Vocab vocab = tk::build_vocab(text, 120);
  std::vector<std::vector<std::int32_t>> sentences;
  for (const auto& t : text) sentences.push_back(tk::text_piece_ids(t, vocab));
  ob::PretrainHyper hyper;
  hyper.epochs = 3;
  hyper.batch_size = 32;
  hyper.lr = 3e-3;
  hyper.max_len = 32;
  hyper.seed = 83;
  Rng rng(hyper.seed);
  auto state = ob::init_pretrain_state(small_config(vocab.size()), rng);
  Rng example_stream = Rng(hyper.seed).fork(0);
  const auto examples = ob::make_examples(sentences, vocab, hyper.max_len, example_stream);
  const double initial = eval_losses(state, examples).mlm;
  ob::pretrain(state, sentences, vocab, hyper);
  EXPECT_LT(eval_losses(state, examples).mlm, 0.85 * initial);
}

TEST(Pretrain, TooSmallCorpus) {
  PretrainFixture f;
  auto state = f.fresh();
  const std::vector<std::vector<std::int32_t>> one{{5, 6}};
  EXPECT_THROW(ob::pretrain(state, one, f.vocab, f.hyper), ob::CorpusTooSmall);
}

TEST(LossHistoryCsv, Format) {
  EXPECT_EQ(ob::loss_history_csv({{1, 2.5, 0.5}, {2, 1.25, 0.75}}),
            "step,mlm_loss,nsp_loss\n1,2.500000,0.500000\n2,1.250000,0.750000\n");
}
