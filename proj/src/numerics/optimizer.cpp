#include "sstbert/numerics/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string_view>

namespace sstbert::numerics {

double LinearSchedule::lr_at(std::uint64_t step) const {
  if (warmup_steps > 0 && step < warmup_steps) {
    return peak_lr * static_cast<double>(step + 1) / static_cast<double>(warmup_steps);
  }
  if (total_steps <= warmup_steps) return peak_lr;
  const double remaining = static_cast<double>(total_steps) - static_cast<double>(step);
  const double span = static_cast<double>(total_steps - warmup_steps);
  return peak_lr * std::clamp(remaining / span, 0.0, 1.0);
}

namespace {

bool decays(std::string_view name) {
  return !(name.ends_with(".b") || name.ends_with(".g"));
}

}  // namespace

AdamW::AdamW(std::vector<NamedTensor<float>> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0f);
    v_.emplace_back(p.tensor.size(), 0.0f);
    decay_.push_back(decays(p.name));
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

double AdamW::step(double lr) {
  double sq = 0.0;
  for (auto& p : params_) {
    if (!p.tensor.has_grad()) continue;
    for (float g : p.tensor.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  const double clip = (config_.clip_norm > 0.0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;

  ++steps_;
  const double t = static_cast<double>(steps_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t k = 0; k < params_.size(); ++k) {
    auto& p = params_[k].tensor;
    if (!p.has_grad()) continue;
    auto values = p.values();
    auto grad = p.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad[i] * clip;
      m[i] = static_cast<float>(config_.beta1 * m[i] + (1.0 - config_.beta1) * g);
      v[i] = static_cast<float>(config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g);
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double update = mhat / (std::sqrt(vhat) + config_.eps);
      if (decay_[k]) update += config_.weight_decay * values[i];
      values[i] = static_cast<float>(values[i] - lr * update);
    }
  }
  zero_grad();
  return norm;
}

TensorTable AdamW::export_state() const {
  TensorTable table;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const Shape& shape = params_[k].tensor.shape();
    table.push_back({"adam.m." + params_[k].name, Tensor<float>(shape, m_[k])});
    table.push_back({"adam.v." + params_[k].name, Tensor<float>(shape, v_[k])});
  }
  return table;
}

void AdamW::import_state(const TensorTable& table, std::uint64_t steps) {
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const auto* m = find_tensor(table, "adam.m." + params_[k].name);
    const auto* v = find_tensor(table, "adam.v." + params_[k].name);
    if (m == nullptr || v == nullptr) {
      throw FormatError("optimizer state missing for '" + params_[k].name + "'");
    }
    if (m->shape() != params_[k].tensor.shape() || v->shape() != params_[k].tensor.shape()) {
      throw FormatError("optimizer state shape mismatch for '" + params_[k].name + "'");
    }
    m_[k].assign(m->values().begin(), m->values().end());
    v_[k].assign(v->values().begin(), v->values().end());
  }
  steps_ = steps;
}

}  // namespace sstbert::numerics
