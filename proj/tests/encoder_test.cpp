#include <gtest/gtest.h>

#include <cmath>

#include "sstbert/encoder/encoder.hpp"
#include "sstbert/numerics/errors.hpp"
#include "sstbert/numerics/ops.hpp"
#include "support/grad_probe.hpp"

namespace en = sstbert::encoder;
namespace nx = sstbert::numerics;
namespace tk = sstbert::tokenizer;
using nx::Tensor;

namespace {

en::ModelConfig small_toy(std::size_t vocab = 40) {
  auto c = en::preset("toy");
  c.vocab = vocab;
  return c;
}

tk::TokenSequence random_sequence(nx::Rng& rng, std::size_t vocab, std::size_t n_real,
                                  std::size_t max_len, bool pair = false) {
  std::vector<std::int32_t> a, b;
  const std::size_t body = n_real - (pair ? 3 : 2);
  const std::size_t split = pair ? body / 2 : body;
  for (std::size_t i = 0; i < body; ++i) {
    const auto id = static_cast<std::int32_t>(5 + rng.below(vocab - 5));
    (i < split ? a : b).push_back(id);
  }
  return pair ? tk::frame_pair(a, b, max_len) : tk::frame_single(a, max_len);
}

template <typename T>
std::vector<T> values_of(const Tensor<T>& t) {
  return {t.values().begin(), t.values().end()};
}

}  // namespace

TEST(Preset, TableValues) {
  const auto base = en::preset("base");
  EXPECT_EQ(base.layers, 12u);
  EXPECT_EQ(base.hidden, 768u);
  EXPECT_EQ(base.heads, 12u);
  EXPECT_EQ(base.intermediate, 3072u);
  const auto large = en::preset("large");
  EXPECT_EQ(large.layers, 24u);
  EXPECT_EQ(large.hidden, 1024u);
  EXPECT_EQ(large.heads, 16u);
  const auto toy = en::preset("toy");
  EXPECT_EQ(toy.layers, 2u);
  EXPECT_EQ(toy.hidden, 64u);
  EXPECT_EQ(toy.heads, 2u);
  EXPECT_EQ(toy.max_positions, 64u);
  EXPECT_THROW(en::preset("huge"), en::UnknownPreset);
}

TEST(ModelConfig, Validation) {
  auto c = en::preset("toy");
  c.heads = 3;
  EXPECT_THROW(c.validate(), en::ConfigError);
  c = en::preset("toy");
  c.dropout_p = 1.0;
  EXPECT_THROW(c.validate(), en::ConfigError);
  c = en::preset("toy");
  c.layers = 0;
  EXPECT_THROW(c.validate(), en::ConfigError);
}

TEST(ParamCount, PresetsNearPublishedTotals) {
  const double base = static_cast<double>(en::param_count(en::preset("base")));
  const double large = static_cast<double>(en::param_count(en::preset("large")));
  EXPECT_LT(std::abs(base - 110e6) / 110e6, 0.05);
  EXPECT_LT(std::abs(large - 340e6) / 340e6, 0.05);
}

TEST(ParamCount, ToyMatchesShapeWalk) {
  const auto config = en::preset("toy");
  nx::Rng rng(1);
  const auto params = en::init_params(config, rng);
  std::size_t walked = 0;
  for (const auto& named : params.named()) walked += named.tensor.size();
  EXPECT_EQ(en::param_count(config), walked);
}

TEST(InitParams, DeterministicGainsAndSpread) {
  const auto config = en::preset("toy");
  nx::Rng r1(42), r2(42);
  const auto a = en::init_params(config, r1);
  const auto b = en::init_params(config, r2);
  const auto na = a.named(), nb = b.named();
  ASSERT_EQ(na.size(), nb.size());
  for (std::size_t i = 0; i < na.size(); ++i) {
    EXPECT_EQ(na[i].name, nb[i].name);
    EXPECT_EQ(values_of(na[i].tensor), values_of(nb[i].tensor));
  }
  for (const auto& named : na) {
    if (named.name.ends_with(".g")) {
      for (float v : named.tensor.values()) ASSERT_EQ(v, 1.0f) << named.name;
    } else if (named.name.ends_with(".b")) {
      for (float v : named.tensor.values()) ASSERT_EQ(v, 0.0f) << named.name;
    }
  }
  const auto& tok = a.tok;
  ASSERT_GE(tok.size(), 10000u);
  double s = 0.0, ss = 0.0;
  for (float v : tok.values()) {
    s += v;
    ss += static_cast<double>(v) * v;
    ASSERT_LE(std::abs(v), 0.04f + 1e-7f);
  }
  const double n = static_cast<double>(tok.size());
  const double sd = std::sqrt(ss / n - (s / n) * (s / n));
  EXPECT_GE(sd, 0.015);
  EXPECT_LE(sd, 0.025);
}

TEST(InitParams, CanonicalNames) {
  nx::Rng rng(1);
  const auto params = en::init_params(en::preset("toy"), rng);
  std::vector<std::string> names;
  for (const auto& n : params.named()) names.push_back(n.name);
  const std::vector<std::string> expected_prefix{"emb.tok", "emb.pos", "emb.seg", "emb.ln.g",
                                                 "emb.ln.b", "layer.0.attn.q.w"};
  EXPECT_TRUE(std::equal(expected_prefix.begin(), expected_prefix.end(), names.begin()));
  for (const char* want : {"layer.1.ffn.in.w", "layer.1.ffn.out.b", "layer.0.ln1.g", "layer.1.ln2.b",
                           "layer.1.attn.o.b", "pooler.w", "pooler.b"}) {
    EXPECT_NE(std::find(names.begin(), names.end(), want), names.end()) << want;
  }
}

TEST(ParamsFromTable, ValidatesShapesAndFiniteness) {
  const auto config = small_toy();
  nx::Rng rng(2);
  const auto params = en::init_params(config, rng);
  nx::TensorTable table;
  for (const auto& n : params.named()) table.push_back({n.name, n.tensor.clone()});
  const auto back = en::params_from_table(table, config);
  EXPECT_EQ(values_of(back.pooler_w), values_of(params.pooler_w));

  auto wrong = config;
  wrong.hidden = 32;
  wrong.heads = 2;
  EXPECT_THROW(en::params_from_table(table, wrong), en::ParamError);
  table[3].tensor.values()[0] = std::nanf("");
  EXPECT_THROW(en::params_from_table(table, config), en::ParamError);
  table.erase(table.begin());
  EXPECT_THROW(en::params_from_table(table, config), en::ParamError);
}

TEST(AttentionBlock, SinglePositionAttendsToItself) {
  const auto config = small_toy();
  nx::Rng rng(3);
  const auto params = en::init_params(config, rng);
  std::vector<float> v(config.hidden);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  const std::vector<std::int32_t> mask{1};
  Tensor<float> probs;
  const auto y = en::attention_block(Tensor<float>({1, config.hidden}, v), params.layers[0], mask, 1,
                                     config, {}, &probs);
  ASSERT_EQ(probs.size(), config.heads);
  for (float p : probs.values()) EXPECT_EQ(p, 1.0f);
  for (float x : y.values()) EXPECT_TRUE(std::isfinite(x));
}

TEST(AttentionBlock, OnlyUnmaskedKeyGetsWeight) {
  const auto config = small_toy();
  nx::Rng rng(4);
  const auto params = en::init_params(config, rng);
  const std::size_t n = 5;
  std::vector<float> v(n * config.hidden);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  const std::vector<std::int32_t> mask{1, 0, 0, 0, 0};
  Tensor<float> probs;
  en::attention_block(Tensor<float>({n, config.hidden}, v), params.layers[0], mask, 1, config, {}, &probs);
  for (std::size_t row = 0; row < config.heads * n; ++row) {
    EXPECT_EQ(probs[row * n], 1.0f);
    for (std::size_t j = 1; j < n; ++j) EXPECT_EQ(probs[row * n + j], 0.0f);
  }
}

TEST(AttentionBlock, PermutingPositionsPermutesOutputs) {
  const auto config = small_toy();
  nx::Rng rng(5);
  const auto params = en::cast_params<double>(en::init_params(config, rng));
  const std::size_t n = 6, h = config.hidden;
  std::vector<double> v(n * h);
  for (auto& x : v) x = rng.normal();
  const std::vector<std::int32_t> mask{1, 1, 1, 1, 0, 0};
  const auto y = en::attention_block(Tensor<double>({n, h}, v), params.layers[1], mask, 1, config, {});
  std::vector<double> swapped = v;
  std::swap_ranges(swapped.begin() + 1 * h, swapped.begin() + 2 * h, swapped.begin() + 3 * h);
  const auto z = en::attention_block(Tensor<double>({n, h}, swapped), params.layers[1], mask, 1, config, {});
  for (std::size_t c = 0; c < h; ++c) {
    EXPECT_NEAR(y[1 * h + c], z[3 * h + c], 1e-12);
    EXPECT_NEAR(y[3 * h + c], z[1 * h + c], 1e-12);
    EXPECT_NEAR(y[0 * h + c], z[0 * h + c], 1e-12);
  }
}

TEST(Encode, ShapesDeterminismAndPadInsensitivity) {
  const auto config = en::preset("toy");
  nx::Rng rng(6);
  const auto params = en::init_params(config, rng);
  auto seq = random_sequence(rng, config.vocab, 7, 16);
  const auto a = en::encode(seq, params, config);
  EXPECT_EQ(a.hidden.shape(), (nx::Shape{16, 64}));
  EXPECT_EQ(a.pooled.shape(), (nx::Shape{64}));
  const auto b = en::encode(seq, params, config);
  EXPECT_EQ(values_of(a.hidden), values_of(b.hidden));
  EXPECT_EQ(values_of(a.pooled), values_of(b.pooled));

  seq.ids[10] = 77;  // A padded slot: ignored by attention.
  const auto c = en::encode(seq, params, config);
  EXPECT_EQ(values_of(a.pooled), values_of(c.pooled));

  seq.ids[3] = seq.ids[3] == 9 ? 10 : 9;
  const auto d = en::encode(seq, params, config);
  EXPECT_NE(values_of(a.pooled), values_of(d.pooled));

  seq.ids[1] = static_cast<std::int32_t>(config.vocab);
  EXPECT_THROW(en::encode(seq, params, config), nx::IndexOutOfRange);
}

TEST(Encode, TrainingDropoutVariesInferenceDoesNot) {
  const auto config = small_toy();
  nx::Rng rng(7);
  const auto params = en::init_params(config, rng);
  const auto seq = random_sequence(rng, config.vocab, 8, 12);
  nx::Rng d1(1), d2(2);
  const auto a = en::encode(seq, params, config, true, &d1);
  const auto b = en::encode(seq, params, config, true, &d2);
  EXPECT_NE(values_of(a.pooled), values_of(b.pooled));
}

TEST(Encode, PooledInvariantToPaddingLength) {
  const auto config = en::preset("toy");
  nx::Rng rng(8);
  const auto params = en::init_params(config, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const auto short_seq = random_sequence(rng, config.vocab, 2 + rng.below(15), 16);
    std::vector<std::int32_t> body(short_seq.ids.begin() + 1, short_seq.ids.begin() + static_cast<long>(short_seq.n_real) - 1);
    const auto long_seq = tk::frame_single(body, 32);
    const auto a = en::encode(short_seq, params, config);
    const auto b = en::encode(long_seq, params, config);
    for (std::size_t i = 0; i < config.hidden; ++i) ASSERT_NEAR(a.pooled[i], b.pooled[i], 1e-5);
  }
}

TEST(Encode, BatchMatchesSingleAndAttentionRowsNormalized) {
  const auto config = small_toy();
  nx::Rng rng(9);
  const auto params = en::cast_params<double>(en::init_params(config, rng));
  std::vector<tk::TokenSequence> batch;
  for (int i = 0; i < 4; ++i) batch.push_back(random_sequence(rng, config.vocab, 3 + rng.below(10), 16, i % 2 == 1));
  en::EncodeOptions options;
  options.keep_attention = true;
  const auto out = en::encode_batch<double>(batch, params, config, options);
  const std::size_t n = out.seq_len;
  ASSERT_EQ(out.pooled.shape(), (nx::Shape{4, config.hidden}));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto single = en::encode(batch[b], params, config);
    for (std::size_t c = 0; c < config.hidden; ++c) {
      ASSERT_NEAR(out.pooled[b * config.hidden + c], single.pooled[c], 1e-12);
    }
  }
  for (const auto& probs : out.attention) {
    for (std::size_t row = 0; row < probs.dim(0); ++row) {
      const std::size_t b = row / (config.heads * n);
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (batch[b].mask[j] == 0) {
          ASSERT_EQ(probs[row * n + j], 0.0);
        }
        s += probs[row * n + j];
      }
      ASSERT_NEAR(s, 1.0, 1e-6);
    }
  }
}

TEST(Attention, FiniteDifferencesWithMaskAndDropout) {
  nx::Rng rng(10);
  const std::size_t batch = 2, n = 4, h = 6, heads = 3;
  auto make = [&] {
    std::vector<double> v(batch * n * h);
    for (auto& x : v) x = rng.normal();
    return Tensor<double>({batch * n, h}, v, true);
  };
  for (int trial = 0; trial < 100; ++trial) {
    Tensor<double> q = make(), k = make(), v = make();
    std::vector<double> wv(batch * n * h);
    for (auto& x : wv) x = rng.normal();
    const Tensor<double> w({batch * n, h}, wv);
    const std::vector<std::int32_t> mask{1, 1, 1, 0, 1, 1, 0, 0};
    const bool training = trial % 2 == 1;
    auto f = [&] {
      nx::Rng drop(trial);
      return nx::sum(nx::mul(nx::multi_head_attention(q, k, v, batch, heads, mask, 0.2, training, &drop), w));
    };
    for (auto* x : {&q, &k, &v}) {
      ASSERT_LT(nx::finite_diff_check<double>(f, *x, 1e-6).max_rel_error, 1e-5) << "trial " << trial;
    }
  }
}

TEST(Encode, EndToEndGradientsAt64Bit) {
  const auto config = small_toy(30);
  nx::Rng rng(11);
  const auto params = en::cast_params<double>(en::init_params(config, rng));
  std::vector<tk::TokenSequence> batch{random_sequence(rng, config.vocab, 9, 12, true),
                                       random_sequence(rng, config.vocab, 6, 12)};
  std::vector<double> wv(2 * config.hidden);
  for (auto& x : wv) x = rng.normal();
  const Tensor<double> w({2, config.hidden}, wv);
  en::EncodeOptions options;
  options.training = true;
  auto loss = [&] {
    nx::Rng drop(99);
    auto o = options;
    o.rng = &drop;
    const auto out = en::encode_batch<double>(batch, params, config, o);
    return nx::add(nx::sum(nx::mul(out.pooled, w)), nx::scale(nx::sum(nx::tanh(out.hidden)), 0.01));
  };
  const auto named = params.named();
  nx::Rng pick(12);
  const auto probes = sstbert::testing::sample_probes(named, 12, pick);
  const auto report = sstbert::testing::probe_gradients<double, double>(loss, named, loss, named, probes, 1e-5, 1e-4);
  EXPECT_LT(report.max_rel_error, 1e-5) << report.worst_name << "[" << report.worst_index << "] "
                                        << report.worst_analytic << " vs " << report.worst_numeric;
}
