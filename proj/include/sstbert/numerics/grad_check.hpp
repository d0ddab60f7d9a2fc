#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include "sstbert/numerics/tape.hpp"
#include "sstbert/numerics/tensor.hpp"

namespace sstbert::numerics {

/// |a - n| / max(|a|, |n|, floor). The floor keeps components whose true
/// gradient is (near) zero from dominating through round-off alone.
double relative_error(double analytic, double numeric, double floor);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
  /// False when some numeric derivative came out NaN/Inf (e.g. a
  /// discontinuity straddled by the step); max_rel_error is then +inf.
  bool finite = true;
};

/// Central difference of eval() with respect to one stored value. The step
/// actually taken is measured from the rounded stored values, so the result
/// stays honest at 32-bit storage. The slot is restored afterwards.
template <typename T>
double central_difference(const std::function<double()>& eval, T& slot, double epsilon) {
  const T original = slot;
  slot = static_cast<T>(original + epsilon);
  const double hi_x = slot;
  const double hi = eval();
  slot = static_cast<T>(original - epsilon);
  const double lo_x = slot;
  const double lo = eval();
  slot = original;
  return (hi - lo) / (hi_x - lo_x);
}

/// Compares the autodiff gradient of the scalar f() with respect to x against
/// central finite differences. f must read x's current values on every call.
/// `indices` selects the components to check (all when empty).
template <typename T>
GradCheckReport finite_diff_check(const std::function<Tensor<T>()>& f, Tensor<T>& x,
                                  double epsilon, std::span<const std::size_t> indices = {},
                                  double floor = 1e-4);

}  // namespace sstbert::numerics
