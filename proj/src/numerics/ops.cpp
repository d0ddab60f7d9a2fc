#include "sstbert/numerics/ops.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <string>

#include "sstbert/numerics/errors.hpp"
#include "sstbert/numerics/tape.hpp"

namespace sstbert::numerics {

namespace {

template <typename T>
bool should_record(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape::active() == nullptr) return false;
  return std::any_of(inputs.begin(), inputs.end(),
                     [](const Tensor<T>* t) { return t->requires_grad(); });
}

template <typename T>
void record(std::initializer_list<const Tensor<T>*> inputs, Tensor<T>& out,
            std::function<void()> fn) {
  std::vector<std::uintptr_t> parents;
  parents.reserve(inputs.size());
  for (const Tensor<T>* t : inputs) parents.push_back(t->id());
  out.set_requires_grad(true);
  Tape::active()->record(std::move(parents), out.id(), std::move(fn));
}

template <typename T>
void require_matrix(const Tensor<T>& x, const char* op) {
  if (x.rank() != 2) {
    throw ShapeMismatch(std::string(op) + ": expected a matrix, got " + shape_string(x.shape()));
  }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(op) + ": " + shape_string(a.shape()) + " vs " +
                        shape_string(b.shape()));
  }
}

template <typename T>
std::size_t last_dim(const Tensor<T>& x) {
  return x.shape().back();
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;

}  // namespace

namespace {

/// Widened copy; accumulation always runs in double.
template <typename T>
std::vector<double> widen(const T* p, std::size_t n) {
  return std::vector<double>(p, p + n);
}

/// c = op(a) . op(b) with c [m x n], row-major.
std::vector<double> gemm(bool ta, bool tb, std::size_t m, std::size_t n, std::size_t k,
                         const double* a, const double* b) {
  std::vector<double> c(m * n);
  if (m == 0 || n == 0) return c;
  if (k == 0) return c;
  cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
              static_cast<int>(m), static_cast<int>(n), static_cast<int>(k), 1.0, a,
              static_cast<int>(ta ? m : k), b, static_cast<int>(tb ? k : n), 0.0, c.data(),
              static_cast<int>(n));
  return c;
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  require_matrix(a, "matmul");
  require_matrix(b, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeMismatch("matmul: inner dims disagree " + shape_string(a.shape()) + " . " +
                        shape_string(b.shape()));
  }
  Tensor<T> out({m, n});
  {
    const auto wa = widen(a.data(), a.size());
    const auto wb = widen(b.data(), b.size());
    const auto c = gemm(false, false, m, n, k, wa.data(), wb.data());
    std::transform(c.begin(), c.end(), out.data(), [](double v) { return static_cast<T>(v); });
  }
  if (should_record({&a, &b})) {
    record({&a, &b}, out, [a = a, b = b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      const auto g = widen(out.grad().data(), m * n);
      if (a.requires_grad()) {
        const auto wb = widen(b.data(), b.size());
        const auto ga = gemm(false, true, m, k, n, g.data(), wb.data());
        T* dst = a.grad().data();
        for (std::size_t i = 0; i < ga.size(); ++i) dst[i] += static_cast<T>(ga[i]);
      }
      if (b.requires_grad()) {
        const auto wa = widen(a.data(), a.size());
        const auto gb = gemm(true, false, k, n, m, wa.data(), g.data());
        T* dst = b.grad().data();
        for (std::size_t i = 0; i < gb.size(); ++i) dst[i] += static_cast<T>(gb[i]);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_matrix(a, "transpose");
  const std::size_t m = a.dim(0), n = a.dim(1);
  Tensor<T> out({n, m});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  if (should_record({&a})) {
    record({&a}, out, [a = a, out, m, n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  if (should_record({&a, &b})) {
    record({&a, &b}, out, [a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add_row(const Tensor<T>& x, const Tensor<T>& row) {
  require_matrix(x, "add_row");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (row.size() != n) {
    throw ShapeMismatch("add_row: row of " + std::to_string(row.size()) + " for " +
                        shape_string(x.shape()));
  }
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + row[j];
  if (should_record({&x, &row})) {
    record({&x, &row}, out, [x = x, row = row, out, m, n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (row.requires_grad()) {
        auto gr = row.grad();
        for (std::size_t j = 0; j < n; ++j) {
          double s = 0.0;
          for (std::size_t i = 0; i < m; ++i) s += g[i * n + j];
          gr[j] += static_cast<T>(s);
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  if (should_record({&a, &b})) {
    record({&a, &b}, out, [a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& x, double factor) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<T>(x[i] * factor);
  if (should_record({&x})) {
    record({&x}, out, [x = x, out, factor]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += static_cast<T>(g[i] * factor);
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  double s = 0.0;
  for (T v : x.values()) s += v;
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s));
  if (should_record({&x})) {
    record({&x}, out, [x = x, out]() mutable {
      if (!out.has_grad()) return;
      const T g = out.grad()[0];
      for (T& v : x.grad()) v += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> pick(const Tensor<T>& x, std::size_t flat_index) {
  if (flat_index >= x.size()) {
    throw IndexOutOfRange("pick: index " + std::to_string(flat_index) + " outside " +
                          shape_string(x.shape()));
  }
  Tensor<T> out = Tensor<T>::scalar(x[flat_index]);
  if (should_record({&x})) {
    record({&x}, out, [x = x, out, flat_index]() mutable {
      if (!out.has_grad()) return;
      x.grad()[flat_index] += out.grad()[0];
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& z) {
  const std::size_t k = last_dim(z);
  const std::size_t rows = z.size() / k;
  Tensor<T> out(z.shape());
  std::vector<double> e(k);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* zr = z.data() + r * k;
    const double mx = *std::max_element(zr, zr + k);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      e[j] = std::exp(static_cast<double>(zr[j]) - mx);
      s += e[j];
    }
    for (std::size_t j = 0; j < k; ++j) out[r * k + j] = static_cast<T>(e[j] / s);
  }
  if (should_record({&z})) {
    record({&z}, out, [z = z, out, k, rows]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gz = z.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        double dot = 0.0;
        for (std::size_t j = 0; j < k; ++j)
          dot += static_cast<double>(g[r * k + j]) * out[r * k + j];
        for (std::size_t j = 0; j < k; ++j) {
          const std::size_t i = r * k + j;
          gz[i] += static_cast<T>(out[i] * (g[i] - dot));
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     double eps) {
  const std::size_t h = last_dim(x);
  if (gain.size() != h || bias.size() != h) {
    throw ShapeMismatch("layer_norm: gain/bias of " + std::to_string(gain.size()) + "/" +
                        std::to_string(bias.size()) + " for width " + std::to_string(h));
  }
  const std::size_t rows = x.size() / h;
  Tensor<T> out(x.shape());
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = x.data() + r * h;
    double mean = 0.0;
    for (std::size_t j = 0; j < h; ++j) mean += xr[j];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      const double d = xr[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(h);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < h; ++j) {
      const double xh = (xr[j] - mean) * inv_std[r];
      xhat[r * h + j] = xh;
      out[r * h + j] = static_cast<T>(xh * gain[j] + bias[j]);
    }
  }
  if (should_record({&x, &gain, &bias})) {
    record({&x, &gain, &bias}, out,
           [x = x, gain = gain, bias = bias, out, h, rows, xhat = std::move(xhat), inv_std = std::move(inv_std)]() mutable {
             if (!out.has_grad()) return;
             auto g = out.grad();
             if (gain.requires_grad() || bias.requires_grad()) {
               std::vector<double> dg(h, 0.0), db(h, 0.0);
               for (std::size_t r = 0; r < rows; ++r)
                 for (std::size_t j = 0; j < h; ++j) {
                   dg[j] += g[r * h + j] * xhat[r * h + j];
                   db[j] += g[r * h + j];
                 }
               if (gain.requires_grad()) {
                 auto gg = gain.grad();
                 for (std::size_t j = 0; j < h; ++j) gg[j] += static_cast<T>(dg[j]);
               }
               if (bias.requires_grad()) {
                 auto gb = bias.grad();
                 for (std::size_t j = 0; j < h; ++j) gb[j] += static_cast<T>(db[j]);
               }
             }
             if (x.requires_grad()) {
               auto gx = x.grad();
               std::vector<double> dxh(h);
               for (std::size_t r = 0; r < rows; ++r) {
                 double mean_d = 0.0, mean_dx = 0.0;
                 for (std::size_t j = 0; j < h; ++j) {
                   dxh[j] = static_cast<double>(g[r * h + j]) * gain[j];
                   mean_d += dxh[j];
                   mean_dx += dxh[j] * xhat[r * h + j];
                 }
                 mean_d /= static_cast<double>(h);
                 mean_dx /= static_cast<double>(h);
                 for (std::size_t j = 0; j < h; ++j) {
                   gx[r * h + j] += static_cast<T>(
                       inv_std[r] * (dxh[j] - mean_d - xhat[r * h + j] * mean_dx));
                 }
               }
             }
           });
  }
  return out;
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    out[i] = static_cast<T>(0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v))));
  }
  if (should_record({&x})) {
    record({&x}, out, [x = x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = x[i];
        const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
        const double d = 0.5 * (1.0 + t) +
                         0.5 * v * (1.0 - t * t) * kGeluC * (1.0 + 3.0 * kGeluA * v * v);
        gx[i] += static_cast<T>(g[i] * d);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<T>(std::tanh(static_cast<double>(x[i])));
  if (should_record({&x})) {
    record({&x}, out, [x = x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = out[i];
        gx[i] += static_cast<T>(g[i] * (1.0 - y * y));
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> embedding_lookup(const Tensor<T>& table, std::span<const std::int32_t> ids) {
  require_matrix(table, "embedding_lookup");
  const std::size_t v = table.dim(0), h = table.dim(1);
  if (ids.empty()) throw ShapeMismatch("embedding_lookup: no ids");
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= v) {
      throw IndexOutOfRange("embedding_lookup: id " + std::to_string(id) + " outside table of " +
                            std::to_string(v) + " rows");
    }
  }
  Tensor<T> out({ids.size(), h});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(table.data() + static_cast<std::size_t>(ids[i]) * h, h, out.data() + i * h);
  }
  if (should_record({&table})) {
    std::vector<std::int32_t> kept(ids.begin(), ids.end());
    record({&table}, out, [table = table, out, h, kept = std::move(kept)]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gt = table.grad();
      for (std::size_t i = 0; i < kept.size(); ++i) {
        T* dst = gt.data() + static_cast<std::size_t>(kept[i]) * h;
        for (std::size_t j = 0; j < h; ++j) dst[j] += g[i * h + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, Rng* rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw InvalidProbability("dropout probability must be in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  if (rng == nullptr) throw std::invalid_argument("dropout: training mode needs an rng");
  const double keep_scale = 1.0 / (1.0 - p);
  std::vector<T> mask(x.size());
  for (T& m : mask) m = rng->uniform() < p ? T{0} : static_cast<T>(keep_scale);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * mask[i];
  if (should_record({&x})) {
    record({&x}, out, [x = x, out, mask = std::move(mask)]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& probs, std::span<const std::int32_t> labels) {
  require_matrix(probs, "cross_entropy");
  const std::size_t n = probs.dim(0), k = probs.dim(1);
  if (labels.size() != n) {
    throw ShapeMismatch("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                        std::to_string(n) + " rows");
  }
  for (std::int32_t y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw LabelOutOfRange("cross_entropy: label " + std::to_string(y) + " with " +
                            std::to_string(k) + " classes");
    }
  }
  static constexpr double kFloor = std::numeric_limits<T>::min();
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    s -= std::log(std::max<double>(probs[i * k + labels[i]], kFloor));
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(n)));
  if (should_record({&probs})) {
    std::vector<std::int32_t> kept(labels.begin(), labels.end());
    record({&probs}, out, [probs = probs, out, n, k, kept = std::move(kept)]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      auto gp = probs.grad();
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t idx = i * k + kept[i];
        gp[idx] -= static_cast<T>(g / (static_cast<double>(n) * std::max<double>(probs[idx], kFloor)));
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::int32_t> labels) {
  require_matrix(logits, "softmax_cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw ShapeMismatch("softmax_cross_entropy: " + std::to_string(labels.size()) +
                        " labels for " + std::to_string(n) + " rows");
  }
  for (std::int32_t y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= k) {
      throw LabelOutOfRange("softmax_cross_entropy: label " + std::to_string(y) + " with " +
                            std::to_string(k) + " classes");
    }
  }
  std::vector<double> probs(n * k);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const T* zr = logits.data() + i * k;
    const double mx = *std::max_element(zr, zr + k);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      probs[i * k + j] = std::exp(static_cast<double>(zr[j]) - mx);
      denom += probs[i * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) probs[i * k + j] /= denom;
    s += std::log(denom) + mx - static_cast<double>(zr[labels[i]]);
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(n)));
  if (should_record({&logits})) {
    std::vector<std::int32_t> kept(labels.begin(), labels.end());
    record({&logits}, out,
           [logits = logits, out, n, k, kept = std::move(kept), probs = std::move(probs)]() mutable {
             if (!out.has_grad()) return;
             const double g = out.grad()[0] / static_cast<double>(n);
             auto gz = logits.grad();
             for (std::size_t i = 0; i < n; ++i) {
               for (std::size_t j = 0; j < k; ++j) {
                 const double onehot = static_cast<std::size_t>(kept[i]) == j ? 1.0 : 0.0;
                 gz[i * k + j] += static_cast<T>(g * (probs[i * k + j] - onehot));
               }
             }
           });
  }
  return out;
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_cols");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (count == 0 || begin + count > n) {
    throw ShapeMismatch("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                        ") of " + shape_string(x.shape()));
  }
  Tensor<T> out({m, count});
  for (std::size_t i = 0; i < m; ++i)
    std::copy_n(x.data() + i * n + begin, count, out.data() + i * count);
  if (should_record({&x})) {
    record({&x}, out, [x = x, out, m, n, begin, count]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < count; ++j) gx[i * n + begin + j] += g[i * count + j];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols: no parts");
  const std::size_t m = parts.front().dim(0);
  std::size_t n = 0;
  for (const auto& p : parts) {
    require_matrix(p, "concat_cols");
    if (p.dim(0) != m) throw ShapeMismatch("concat_cols: row counts differ");
    n += p.dim(1);
  }
  Tensor<T> out({m, n});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    for (std::size_t i = 0; i < m; ++i) std::copy_n(p.data() + i * w, w, out.data() + i * n + offset);
    offset += w;
  }
  const bool any = Tape::active() != nullptr &&
                   std::any_of(parts.begin(), parts.end(), [](const auto& p) { return p.requires_grad(); });
  if (any) {
    std::vector<std::uintptr_t> ids;
    for (const auto& p : parts) ids.push_back(p.id());
    out.set_requires_grad(true);
    Tape::active()->record(std::move(ids), out.id(), [parts = parts, out, m, n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& p : parts) {
        const std::size_t w = p.dim(1);
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < w; ++j) gp[i * w + j] += g[i * n + offset + j];
        }
        offset += w;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_matrix(x, "slice_rows");
  const std::size_t m = x.dim(0), n = x.dim(1);
  if (count == 0 || begin + count > m) {
    throw ShapeMismatch("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                        ") of " + shape_string(x.shape()));
  }
  Tensor<T> out({count, n});
  std::copy_n(x.data() + begin * n, count * n, out.data());
  if (should_record({&x})) {
    record({&x}, out, [x = x, out, n, begin]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[begin * n + i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw ShapeMismatch("reshape: " + shape_string(x.shape()) + " -> " + shape_string(shape));
  }
  std::vector<T> values(x.values().begin(), x.values().end());
  Tensor<T> out(std::move(shape), std::move(values));
  if (should_record({&x})) {
    record({&x}, out, [x = x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> multi_head_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                               std::size_t batch, std::size_t heads,
                               std::span<const std::int32_t> key_mask, double dropout_p,
                               bool training, Rng* rng, Tensor<T>* probs_out) {
  require_matrix(q, "multi_head_attention");
  require_same_shape(q, k, "multi_head_attention");
  require_same_shape(q, v, "multi_head_attention");
  const std::size_t rows = q.dim(0), width = q.dim(1);
  if (batch == 0 || rows % batch != 0 || heads == 0 || width % heads != 0) {
    throw ShapeMismatch("multi_head_attention: " + shape_string(q.shape()) + " does not split into " +
                        std::to_string(batch) + " sequences and " + std::to_string(heads) + " heads");
  }
  if (key_mask.size() != rows) {
    throw ShapeMismatch("multi_head_attention: key mask has " + std::to_string(key_mask.size()) +
                        " entries for " + std::to_string(rows) + " rows");
  }
  if (!(dropout_p >= 0.0 && dropout_p < 1.0)) {
    throw InvalidProbability("dropout probability must be in [0, 1), got " + std::to_string(dropout_p));
  }
  const bool drop = training && dropout_p > 0.0;
  if (drop && rng == nullptr) throw std::invalid_argument("multi_head_attention: training mode needs an rng");

  const std::size_t n = rows / batch, d = width / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  const double keep_scale = 1.0 / (1.0 - dropout_p);
  // probs[((b*heads + h)*n + i)*n + j]; dmask likewise (1 without dropout).
  std::vector<double> probs(batch * heads * n * n);
  std::vector<double> dmask(drop ? probs.size() : 0);
  Tensor<T> out({rows, width});
  std::vector<double> acc(d);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t i = 0; i < n; ++i) {
        double* p = probs.data() + ((b * heads + h) * n + i) * n;
        const T* qi = q.data() + (b * n + i) * width + h * d;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
          const T* kj = k.data() + (b * n + j) * width + h * d;
          double s = 0.0;
          for (std::size_t c = 0; c < d; ++c) s += static_cast<double>(qi[c]) * kj[c];
          s *= scale;
          if (key_mask[b * n + j] == 0) s -= 1e9;
          p[j] = s;
          mx = std::max(mx, s);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          p[j] = std::exp(p[j] - mx);
          z += p[j];
        }
        for (std::size_t j = 0; j < n; ++j) p[j] /= z;

        double* dm = drop ? dmask.data() + ((b * heads + h) * n + i) * n : nullptr;
        if (drop) {
          for (std::size_t j = 0; j < n; ++j) dm[j] = rng->uniform() < dropout_p ? 0.0 : keep_scale;
        }
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
          const double w = drop ? p[j] * dm[j] : p[j];
          if (w == 0.0) continue;
          const T* vj = v.data() + (b * n + j) * width + h * d;
          for (std::size_t c = 0; c < d; ++c) acc[c] += w * vj[c];
        }
        T* oi = out.data() + (b * n + i) * width + h * d;
        for (std::size_t c = 0; c < d; ++c) oi[c] = static_cast<T>(acc[c]);
      }
    }
  }
  if (probs_out != nullptr) {
    std::vector<T> copy(probs.begin(), probs.end());
    *probs_out = Tensor<T>({batch * heads * n, n}, std::move(copy));
  }
  if (should_record({&q, &k, &v})) {
    record({&q, &k, &v}, out,
           [q = q, k = k, v = v, out, probs = std::move(probs), dmask = std::move(dmask), batch,
            heads, n, d, width, scale, drop]() mutable {
             if (!out.has_grad()) return;
             const T* g = out.grad().data();
             T* gq = q.requires_grad() ? q.grad().data() : nullptr;
             T* gk = k.requires_grad() ? k.grad().data() : nullptr;
             T* gv = v.requires_grad() ? v.grad().data() : nullptr;
             std::vector<double> dp(n);
             for (std::size_t b = 0; b < batch; ++b) {
               for (std::size_t h = 0; h < heads; ++h) {
                 for (std::size_t i = 0; i < n; ++i) {
                   const std::size_t row = ((b * heads + h) * n + i) * n;
                   const double* p = probs.data() + row;
                   const double* dm = drop ? dmask.data() + row : nullptr;
                   const T* gi = g + (b * n + i) * width + h * d;
                   double dot = 0.0;
                   for (std::size_t j = 0; j < n; ++j) {
                     const T* vj = v.data() + (b * n + j) * width + h * d;
                     const double w = drop ? p[j] * dm[j] : p[j];
                     double s = 0.0;
                     for (std::size_t c = 0; c < d; ++c) s += static_cast<double>(gi[c]) * vj[c];
                     if (gv != nullptr && w != 0.0) {
                       T* gvj = gv + (b * n + j) * width + h * d;
                       for (std::size_t c = 0; c < d; ++c) gvj[c] += static_cast<T>(w * gi[c]);
                     }
                     dp[j] = drop ? s * dm[j] : s;
                     dot += p[j] * dp[j];
                   }
                   const T* qi = q.data() + (b * n + i) * width + h * d;
                   T* gqi = gq != nullptr ? gq + (b * n + i) * width + h * d : nullptr;
                   for (std::size_t j = 0; j < n; ++j) {
                     const double ds = p[j] * (dp[j] - dot) * scale;
                     if (ds == 0.0) continue;
                     const T* kj = k.data() + (b * n + j) * width + h * d;
                     if (gqi != nullptr) {
                       for (std::size_t c = 0; c < d; ++c) gqi[c] += static_cast<T>(ds * kj[c]);
                     }
                     if (gk != nullptr) {
                       T* gkj = gk + (b * n + j) * width + h * d;
                       for (std::size_t c = 0; c < d; ++c) gkj[c] += static_cast<T>(ds * qi[c]);
                     }
                   }
                 }
               }
             }
           });
  }
  return out;
}

#define SSTBERT_INSTANTIATE_OPS(T)                                                         \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> transpose(const Tensor<T>&);                                          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> add_row(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> scale(const Tensor<T>&, double);                                      \
  template Tensor<T> sum(const Tensor<T>&);                                                \
  template Tensor<T> pick(const Tensor<T>&, std::size_t);                                  \
  template Tensor<T> softmax(const Tensor<T>&);                                            \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double); \
  template Tensor<T> gelu(const Tensor<T>&);                                               \
  template Tensor<T> tanh(const Tensor<T>&);                                               \
  template Tensor<T> embedding_lookup(const Tensor<T>&, std::span<const std::int32_t>);    \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, Rng*);                        \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::span<const std::int32_t>);       \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const std::int32_t>); \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);               \
  template Tensor<T> concat_cols(const std::vector<Tensor<T>>&);                           \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);               \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                     \
  template Tensor<T> multi_head_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, \
                                          std::size_t, std::size_t,                        \
                                          std::span<const std::int32_t>, double, bool, Rng*, \
                                          Tensor<T>*);

SSTBERT_INSTANTIATE_OPS(float)
SSTBERT_INSTANTIATE_OPS(double)

#undef SSTBERT_INSTANTIATE_OPS

}  // namespace sstbert::numerics
