#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sstbert::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array taking part in reverse-mode differentiation.
///
/// A Tensor is a shared handle: copies alias the same storage, which is how
/// parameters are shared between a model, its optimizer, and the tape.
/// Use clone() for an independent copy. The gradient buffer is allocated on
/// first access and always matches the value shape.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor();
  explicit Tensor(Shape shape, bool requires_grad = false);
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor scalar(T value, bool requires_grad = false);
  static Tensor filled(Shape shape, T value, bool requires_grad = false);

  const Shape& shape() const { return storage_->shape; }
  std::size_t rank() const { return storage_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return storage_->shape.at(axis); }
  std::size_t size() const { return storage_->values.size(); }
  bool empty() const { return storage_->values.empty(); }

  std::span<T> values() { return storage_->values; }
  std::span<const T> values() const { return storage_->values; }
  T* data() { return storage_->values.data(); }
  const T* data() const { return storage_->values.data(); }

  T& operator[](std::size_t i) { return storage_->values[i]; }
  const T& operator[](std::size_t i) const { return storage_->values[i]; }
  T& at(std::size_t row, std::size_t col);
  const T& at(std::size_t row, std::size_t col) const;

  /// Value of a single-element tensor.
  T item() const;

  bool requires_grad() const { return storage_->requires_grad; }
  void set_requires_grad(bool on) { storage_->requires_grad = on; }

  bool has_grad() const { return !storage_->grad.empty(); }
  /// Gradient buffer; zero-initialised on first call.
  std::span<T> grad();
  std::span<const T> grad() const;
  void zero_grad();
  void drop_grad() { storage_->grad.clear(); storage_->grad.shrink_to_fit(); }

  /// Independent copy of the values, detached from any tape.
  Tensor clone(bool requires_grad = false) const;

  /// Identity of the underlying storage (used by the tape for bookkeeping).
  std::uintptr_t id() const { return reinterpret_cast<std::uintptr_t>(storage_.get()); }
  bool same_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> storage_;
};

/// Elementwise conversion; the result is a fresh leaf.
template <typename To, typename From>
Tensor<To> tensor_cast(const Tensor<From>& from, bool requires_grad = false) {
  std::vector<To> values(from.values().begin(), from.values().end());
  return Tensor<To>(from.shape(), std::move(values), requires_grad);
}

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace sstbert::numerics
