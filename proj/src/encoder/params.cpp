#include "sstbert/encoder/params.hpp"

#include <cmath>

#include "sstbert/numerics/errors.hpp"

namespace sstbert::encoder {

namespace {

using numerics::Shape;

template <typename P, typename F>
void for_each_tensor(P& p, F&& f) {
  f("emb.tok", p.tok);
  f("emb.pos", p.pos);
  f("emb.seg", p.seg);
  f("emb.ln.g", p.emb_ln_g);
  f("emb.ln.b", p.emb_ln_b);
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string pre = "layer." + std::to_string(i) + ".";
    f(pre + "attn.q.w", l.q_w);
    f(pre + "attn.q.b", l.q_b);
    f(pre + "attn.k.w", l.k_w);
    f(pre + "attn.k.b", l.k_b);
    f(pre + "attn.v.w", l.v_w);
    f(pre + "attn.v.b", l.v_b);
    f(pre + "attn.o.w", l.o_w);
    f(pre + "attn.o.b", l.o_b);
    f(pre + "ffn.in.w", l.ffn_in_w);
    f(pre + "ffn.in.b", l.ffn_in_b);
    f(pre + "ffn.out.w", l.ffn_out_w);
    f(pre + "ffn.out.b", l.ffn_out_b);
    f(pre + "ln1.g", l.ln1_g);
    f(pre + "ln1.b", l.ln1_b);
    f(pre + "ln2.g", l.ln2_g);
    f(pre + "ln2.b", l.ln2_b);
  }
  f("pooler.w", p.pooler_w);
  f("pooler.b", p.pooler_b);
}

// Expected shape for every name, in the same order as for_each_tensor.
EncoderParams<float> shaped(const ModelConfig& c) {
  const std::size_t h = c.hidden, f = c.intermediate;
  EncoderParams<float> p;
  p.tok = Tensor<float>({c.vocab, h});
  p.pos = Tensor<float>({c.max_positions, h});
  p.seg = Tensor<float>({c.segment_types, h});
  p.emb_ln_g = Tensor<float>::filled({h}, 1.0f);
  p.emb_ln_b = Tensor<float>({h});
  for (std::size_t i = 0; i < c.layers; ++i) {
    LayerParams<float> l;
    for (auto* w : {&l.q_w, &l.k_w, &l.v_w, &l.o_w}) *w = Tensor<float>({h, h});
    for (auto* b : {&l.q_b, &l.k_b, &l.v_b, &l.o_b, &l.ffn_out_b, &l.ln1_b, &l.ln2_b}) {
      *b = Tensor<float>({h});
    }
    l.ffn_in_w = Tensor<float>({h, f});
    l.ffn_in_b = Tensor<float>({f});
    l.ffn_out_w = Tensor<float>({f, h});
    l.ln1_g = Tensor<float>::filled({h}, 1.0f);
    l.ln2_g = Tensor<float>::filled({h}, 1.0f);
    p.layers.push_back(std::move(l));
  }
  p.pooler_w = Tensor<float>({h, h});
  p.pooler_b = Tensor<float>({h});
  return p;
}

bool is_weight(const std::string& name) {
  return name.ends_with(".w") || name.starts_with("emb.tok") || name.starts_with("emb.pos") ||
         name.starts_with("emb.seg");
}

double truncated_normal(numerics::Rng& rng, double sigma) {
  for (;;) {
    const double z = rng.normal();
    if (std::abs(z) <= 2.0) return sigma * z;
  }
}

}  // namespace

template <typename T>
std::vector<NamedTensor<T>> EncoderParams<T>::named() const {
  std::vector<NamedTensor<T>> out;
  for_each_tensor(*this, [&](const std::string& name, const Tensor<T>& t) { out.push_back({name, t}); });
  return out;
}

template <typename T>
void EncoderParams<T>::set_requires_grad(bool on) {
  for_each_tensor(*this, [&](const std::string&, Tensor<T>& t) { t.set_requires_grad(on); });
}

EncoderParams<float> init_params(const ModelConfig& config, numerics::Rng& rng) {
  config.validate();
  EncoderParams<float> p = shaped(config);
  for_each_tensor(p, [&](const std::string& name, Tensor<float>& t) {
    if (!is_weight(name)) return;
    for (float& v : t.values()) v = static_cast<float>(truncated_normal(rng, 0.02));
  });
  return p;
}

template <typename To, typename From>
EncoderParams<To> cast_params(const EncoderParams<From>& params) {
  EncoderParams<To> out;
  out.layers.resize(params.layers.size());
  auto src = params.named();
  std::size_t i = 0;
  for_each_tensor(out, [&](const std::string&, Tensor<To>& t) {
    t = numerics::tensor_cast<To>(src[i++].tensor);
  });
  return out;
}

template <typename T>
EncoderParams<T> clone_params(const EncoderParams<T>& params) {
  EncoderParams<T> out;
  out.layers.resize(params.layers.size());
  auto src = params.named();
  std::size_t i = 0;
  for_each_tensor(out, [&](const std::string&, Tensor<T>& t) { t = src[i++].tensor.clone(); });
  return out;
}

EncoderParams<float> params_from_table(const numerics::TensorTable& table,
                                       const ModelConfig& config) {
  config.validate();
  EncoderParams<float> p = shaped(config);
  for_each_tensor(p, [&](const std::string& name, Tensor<float>& t) {
    const Tensor<float>* found = numerics::find_tensor(table, name);
    if (found == nullptr) throw ParamError("checkpoint lacks tensor " + name);
    if (found->shape() != t.shape()) {
      throw ParamError("tensor " + name + " has shape " + numerics::shape_string(found->shape()) +
                       ", config expects " + numerics::shape_string(t.shape()));
    }
    t = found->clone();
  });
  validate_params(p, config);
  return p;
}

void validate_params(const EncoderParams<float>& params, const ModelConfig& config) {
  if (params.layers.size() != config.layers) {
    throw ParamError("params hold " + std::to_string(params.layers.size()) + " layers, config " +
                     std::to_string(config.layers));
  }
  const EncoderParams<float> expected = shaped(config);
  const auto want = expected.named();
  const auto have = params.named();
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (have[i].tensor.shape() != want[i].tensor.shape()) {
      throw ParamError("tensor " + have[i].name + " has shape " +
                       numerics::shape_string(have[i].tensor.shape()) + ", config expects " +
                       numerics::shape_string(want[i].tensor.shape()));
    }
    for (float v : have[i].tensor.values()) {
      if (!std::isfinite(v)) throw ParamError("tensor " + have[i].name + " holds a non-finite value");
    }
  }
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;
template EncoderParams<double> cast_params<double, float>(const EncoderParams<float>&);
template EncoderParams<float> cast_params<float, double>(const EncoderParams<double>&);
template EncoderParams<float> clone_params(const EncoderParams<float>&);
template EncoderParams<double> clone_params(const EncoderParams<double>&);

}  // namespace sstbert::encoder
