#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lasan/errors.hpp"

namespace lasan::num {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

// Dense row-major array with an optional gradient buffer.
//
// Tensor is a handle: copies share storage. Parameters are handles held both
// by a ParameterSet and by the layers that use them, so gradients written
// during backward are visible to the optimizer. Use clone() for a deep copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T{0});
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  bool defined() const noexcept { return static_cast<bool>(s_); }
  const Shape& shape() const { return s_->shape; }
  std::size_t dim() const { return s_->shape.size(); }
  std::size_t size(std::size_t axis) const { return s_->shape.at(axis); }
  std::size_t numel() const { return s_->data.size(); }

  std::span<const T> data() const { return s_->data; }
  std::span<T> data() { return s_->data; }
  const std::vector<T>& values() const { return s_->data; }
  T item() const;
  T operator[](std::size_t i) const { return s_->data[i]; }

  bool requires_grad() const noexcept { return s_ && s_->requires_grad; }
  void set_requires_grad(bool on) { s_->requires_grad = on; }

  bool has_grad() const noexcept { return s_ && !s_->grad.empty(); }
  // Gradient buffer; empty span when no gradient has been accumulated.
  std::span<const T> grad() const { return s_->grad; }
  std::span<T> grad_mut() { return s_->grad; }
  // Adds into the gradient buffer, allocating it on first use. Writing into a
  // tensor that does not require gradients is a contract violation.
  void accumulate_grad(std::span<const T> g);
  void accumulate_grad_at(std::size_t i, T g);
  void zero_grad() { s_->grad.clear(); }

  Tensor clone() const;
  // Same values under a new shape (deep copy, no gradient).
  Tensor reshaped(Shape shape) const;
  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(s_->data.begin(), s_->data.end());
    Tensor<U> t(s_->shape, std::move(out));
    t.set_requires_grad(s_->requires_grad);
    return t;
  }

  bool same_storage(const Tensor& other) const noexcept { return s_ == other.s_; }

  // Trace bookkeeping: the trace that produced this tensor, if any.
  const void* producer() const noexcept { return s_ ? s_->producer : nullptr; }
  void set_producer(const void* trace) { s_->producer = trace; }

  // Throws NumericError naming `stage` if any value is NaN or infinite.
  void check_finite(const std::string& stage) const;

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    const void* producer = nullptr;
  };
  std::shared_ptr<Storage> s_;
};

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace lasan::num
