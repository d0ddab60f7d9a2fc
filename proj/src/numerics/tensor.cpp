#include "sstbert/numerics/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "sstbert/numerics/errors.hpp"

namespace sstbert::numerics {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

namespace {

void check_dims(const Shape& shape) {
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeMismatch("tensor dims must be positive, got " + shape_string(shape));
  }
}

}  // namespace

template <typename T>
Tensor<T>::Tensor() : storage_(std::make_shared<Storage>()) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, bool requires_grad) : storage_(std::make_shared<Storage>()) {
  check_dims(shape);
  storage_->values.assign(shape_size(shape), T{0});
  storage_->shape = std::move(shape);
  storage_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values, bool requires_grad)
    : storage_(std::make_shared<Storage>()) {
  check_dims(shape);
  if (shape_size(shape) != values.size()) {
    throw ShapeMismatch("shape " + shape_string(shape) + " does not match " +
                        std::to_string(values.size()) + " values");
  }
  storage_->shape = std::move(shape);
  storage_->values = std::move(values);
  storage_->requires_grad = requires_grad;
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value, bool requires_grad) {
  Tensor t(std::move(shape), requires_grad);
  std::fill(t.storage_->values.begin(), t.storage_->values.end(), value);
  return t;
}

template <typename T>
T& Tensor<T>::at(std::size_t row, std::size_t col) {
  return storage_->values[row * storage_->shape.back() + col];
}

template <typename T>
const T& Tensor<T>::at(std::size_t row, std::size_t col) const {
  return storage_->values[row * storage_->shape.back() + col];
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw NotScalar("item() on tensor of shape " + shape_string(shape()));
  return storage_->values[0];
}

template <typename T>
std::span<T> Tensor<T>::grad() {
  if (storage_->grad.size() != storage_->values.size()) {
    storage_->grad.assign(storage_->values.size(), T{0});
  }
  return storage_->grad;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  return const_cast<Tensor*>(this)->grad();
}

template <typename T>
void Tensor<T>::zero_grad() {
  std::fill(storage_->grad.begin(), storage_->grad.end(), T{0});
}

template <typename T>
Tensor<T> Tensor<T>::clone(bool requires_grad) const {
  if (storage_->values.empty()) return Tensor();
  return Tensor(storage_->shape, storage_->values, requires_grad);
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace sstbert::numerics
