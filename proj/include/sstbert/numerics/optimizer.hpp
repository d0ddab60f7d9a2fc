#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sstbert/numerics/tensor.hpp"
#include "sstbert/numerics/tensor_io.hpp"

namespace sstbert::numerics {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.01;
  /// Global gradient-norm clip; <= 0 disables.
  double clip_norm = 1.0;
};

/// Linear warmup to peak_lr over warmup_steps, then linear decay to zero at
/// total_steps.
struct LinearSchedule {
  double peak_lr = 1e-4;
  std::uint64_t warmup_steps = 0;
  std::uint64_t total_steps = 1;

  double lr_at(std::uint64_t step) const;
};

/// Adam with decoupled weight decay over a fixed set of float parameters.
/// Biases and layer-norm parameters (names ending in ".b" or ".g") are not
/// decayed.
class AdamW {
 public:
  AdamW(std::vector<NamedTensor<float>> params, AdamWConfig config);

  /// Applies one update from the accumulated gradients, then zeroes them.
  /// Returns the pre-clip global gradient norm.
  double step(double lr);

  void zero_grad();

  std::uint64_t steps_taken() const { return steps_; }
  const std::vector<NamedTensor<float>>& params() const { return params_; }

  /// First/second moment tensors as `adam.m.<name>` / `adam.v.<name>`.
  TensorTable export_state() const;
  /// Restores moments and the step counter. Missing moments are an error.
  void import_state(const TensorTable& table, std::uint64_t steps);

 private:
  std::vector<NamedTensor<float>> params_;
  std::vector<std::vector<float>> m_;
  std::vector<std::vector<float>> v_;
  std::vector<bool> decay_;
  AdamWConfig config_;
  std::uint64_t steps_ = 0;
};

}  // namespace sstbert::numerics
