#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lasan/numerics/tensor.hpp"

namespace lasan::num {

// Ordered record of executed differentiable operations.
//
// Operations are appended as they run, so the list is topologically ordered.
// backward() walks it once in reverse and then releases it; a trace cannot be
// differentiated twice. Operations whose inputs need no gradient are not
// recorded at all, which makes eval-mode forwards free of bookkeeping.
template <typename T>
class Trace {
 public:
  // Receives the op's output (with its gradient filled) and pushes gradients
  // into whichever inputs require them.
  using BackwardFn = std::function<void(const Tensor<T>& out)>;

  Trace() = default;
  // A trace built with gradients disabled records nothing; used for
  // inference, where parameters still require gradients.
  explicit Trace(bool grad_enabled) : grad_enabled_(grad_enabled) {}
  Trace(const Trace&) = delete;
  Trace& operator=(const Trace&) = delete;

  // Registers `out` as produced by an op over `inputs`. Returns `out`, marked
  // as requiring gradients iff any input does.
  Tensor<T> record(std::string name, Tensor<T> out, const std::vector<Tensor<T>>& inputs, BackwardFn fn);

  void backward(const Tensor<T>& loss);

  std::size_t size() const noexcept { return ops_.size(); }
  bool consumed() const noexcept { return consumed_; }
  bool grad_enabled() const noexcept { return grad_enabled_; }
  std::vector<std::string> op_names() const;

 private:
  struct Op {
    std::string name;
    Tensor<T> output;
    BackwardFn fn;
  };
  std::vector<Op> ops_;
  bool consumed_ = false;
  bool grad_enabled_ = true;
};

extern template class Trace<float>;
extern template class Trace<double>;

}  // namespace lasan::num
