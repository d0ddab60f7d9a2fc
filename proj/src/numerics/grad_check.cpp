#include "sstbert/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "sstbert/numerics/errors.hpp"

namespace sstbert::numerics {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

template <typename T>
GradCheckReport finite_diff_check(const std::function<Tensor<T>()>& f, Tensor<T>& x,
                                  double epsilon, std::span<const std::size_t> indices,
                                  double floor) {
  std::vector<std::size_t> all;
  if (indices.empty()) {
    all.resize(x.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    indices = all;
  }

  const bool had_requires_grad = x.requires_grad();
  x.set_requires_grad(true);
  x.drop_grad();
  std::vector<double> analytic;
  {
    Tape tape;
    TapeScope scope(tape);
    Tensor<T> loss = f();
    if (loss.size() != 1) throw NotScalar("finite_diff_check: f must be scalar-valued");
    backward(loss);
    auto g = x.grad();
    analytic.reserve(indices.size());
    for (std::size_t i : indices) analytic.push_back(g[i]);
  }
  x.drop_grad();
  x.set_requires_grad(had_requires_grad);

  GradCheckReport report;
  NoGradScope no_grad;
  const std::function<double()> eval = [&f]() { return static_cast<double>(f().item()); };
  auto values = x.values();
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const std::size_t i = indices[n];
    const double numeric = central_difference<T>(eval, values[i], epsilon);
    ++report.checked;
    double err;
    if (!std::isfinite(numeric) || !std::isfinite(analytic[n])) {
      report.finite = false;
      err = std::numeric_limits<double>::infinity();
    } else {
      err = relative_error(analytic[n], numeric, floor);
    }
    if (err > report.max_rel_error || report.checked == 1) {
      report.max_rel_error = err;
      report.worst_index = i;
      report.worst_analytic = analytic[n];
      report.worst_numeric = numeric;
    }
  }
  return report;
}

template GradCheckReport finite_diff_check<float>(const std::function<Tensor<float>()>&,
                                                  Tensor<float>&, double,
                                                  std::span<const std::size_t>, double);
template GradCheckReport finite_diff_check<double>(const std::function<Tensor<double>()>&,
                                                   Tensor<double>&, double,
                                                   std::span<const std::size_t>, double);

}  // namespace sstbert::numerics
