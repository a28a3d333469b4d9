#include "lasan/numerics/trace.hpp"

#include <algorithm>

namespace lasan::num {

template <typename T>
Tensor<T> Trace<T>::record(std::string name, Tensor<T> out, const std::vector<Tensor<T>>& inputs,
                           BackwardFn fn) {
  if (consumed_) throw ContractError("numerics", "recording into a consumed trace");
  if (!grad_enabled_) return out;
  const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.defined() && t.requires_grad(); });
  if (!needs) return out;
  out.set_requires_grad(true);
  out.set_producer(this);
  ops_.push_back(Op{std::move(name), out, std::move(fn)});
  return out;
}

template <typename T>
void Trace<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw ContractError("numerics", "backward on a consumed trace");
  if (!loss.defined() || loss.numel() != 1)
    throw ContractError("numerics", "backward requires a scalar loss");
  if (loss.producer() != this)
    throw ContractError("numerics", "loss was not produced by this trace");
  auto seed = loss;
  seed.accumulate_grad(std::vector<T>{T{1}});
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    if (it->output.has_grad()) it->fn(it->output);
  }
  consumed_ = true;
  ops_.clear();
}

template <typename T>
std::vector<std::string> Trace<T>::op_names() const {
  std::vector<std::string> names;
  names.reserve(ops_.size());
  for (const auto& op : ops_) names.push_back(op.name);
  return names;
}

template class Trace<float>;
template class Trace<double>;

}  // namespace lasan::num
