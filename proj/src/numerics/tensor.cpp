#include "lasan/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace lasan::num {

namespace {

#if defined(__GLIBC__)
// Activations are large and short-lived. Keeping freed blocks in the heap
// instead of returning them to the OS avoids a page-fault storm on every
// training step.
const bool g_heap_tuned = [] {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  mallopt(M_TOP_PAD, 64 << 20);
  return true;
}();
#endif

}  // namespace

std::size_t numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << " x ";
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

void check_extents(const Shape& shape) {
  if (shape.empty()) throw DimensionError("numerics", "tensor needs at least one axis");
  for (auto e : shape)
    if (e == 0) throw DimensionError("numerics", "zero extent in shape " + to_string(shape));
}

}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : s_(std::make_shared<Storage>()) {
  check_extents(shape);
  s_->data.assign(num::numel(shape), fill);
  s_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : s_(std::make_shared<Storage>()) {
  check_extents(shape);
  if (num::numel(shape) != values.size())
    throw DimensionError("numerics", "shape " + to_string(shape) + " does not match " +
                                         std::to_string(values.size()) + " values");
  s_->shape = std::move(shape);
  s_->data = std::move(values);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ContractError("numerics", "item() on non-scalar tensor " + to_string(shape()));
  return s_->data[0];
}

template <typename T>
void Tensor<T>::accumulate_grad(std::span<const T> g) {
  if (!s_->requires_grad) throw ContractError("numerics", "gradient write to a frozen tensor");
  if (g.size() != s_->data.size())
    throw DimensionError("numerics", "gradient size mismatch for " + to_string(shape()));
  if (s_->grad.empty()) {
    s_->grad.assign(g.begin(), g.end());
    return;
  }
  for (std::size_t i = 0; i < g.size(); ++i) s_->grad[i] += g[i];
}

template <typename T>
void Tensor<T>::accumulate_grad_at(std::size_t i, T g) {
  if (!s_->requires_grad) throw ContractError("numerics", "gradient write to a frozen tensor");
  if (s_->grad.empty()) s_->grad.assign(s_->data.size(), T{0});
  s_->grad[i] += g;
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor<T> t(s_->shape, s_->data);
  t.s_->requires_grad = s_->requires_grad;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  return Tensor<T>(std::move(shape), s_->data);
}

template <typename T>
void Tensor<T>::check_finite(const std::string& stage) const {
  const auto bad = std::find_if(s_->data.begin(), s_->data.end(), [](T v) { return !std::isfinite(v); });
  if (bad != s_->data.end())
    throw NumericError("numerics", "non-finite value at stage '" + stage + "' (index " +
                                       std::to_string(bad - s_->data.begin()) + ")");
}

template class Tensor<float>;
template class Tensor<double>;

}  // namespace lasan::num
