#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lasan/numerics/tensor.hpp"
#include "lasan/rng.hpp"

namespace lasan::num {

enum class EntryKind { Parameter, Buffer };

// Named, ordered collection of the tensors a model owns. Buffers (batchnorm
// running statistics) are persisted with the parameters but never receive
// gradients and are not counted as parameters.
template <typename T>
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    EntryKind kind = EntryKind::Parameter;
  };

  Tensor<T> add(std::string name, Tensor<T> t, EntryKind kind = EntryKind::Parameter) {
    if (find(name) != nullptr) throw ConfigError("numerics", "duplicate parameter '" + name + "'");
    t.set_requires_grad(kind == EntryKind::Parameter);
    entries_.push_back(Entry{std::move(name), t, kind});
    return t;
  }

  bool contains(const std::string& name) const { return find(name) != nullptr; }

  Tensor<T> get(const std::string& name) const {
    const Entry* e = find(name);
    if (e == nullptr) throw ConfigError("numerics", "missing parameter '" + name + "'");
    return e->tensor;
  }

  const std::vector<Entry>& entries() const { return entries_; }

  // Frozen parameters keep requires_grad == false; any gradient write into
  // them is rejected by the tensor.
  void set_frozen(const std::string& prefix, bool frozen) {
    for (auto& e : entries_)
      if (e.kind == EntryKind::Parameter && e.name.starts_with(prefix)) e.tensor.set_requires_grad(!frozen);
  }

  bool is_frozen(const std::string& name) const { return !get(name).requires_grad(); }

  std::vector<Entry> trainable() const {
    std::vector<Entry> out;
    for (const auto& e : entries_)
      if (e.kind == EntryKind::Parameter && e.tensor.requires_grad()) out.push_back(e);
    return out;
  }

  std::size_t parameter_count(const std::string& prefix = "") const {
    std::size_t n = 0;
    for (const auto& e : entries_)
      if (e.kind == EntryKind::Parameter && e.name.starts_with(prefix)) n += e.tensor.numel();
    return n;
  }

  void zero_grad() {
    for (auto& e : entries_)
      if (e.tensor.defined()) e.tensor.zero_grad();
  }

  // Deep copy of all values, in entry order.
  std::vector<std::vector<T>> snapshot() const {
    std::vector<std::vector<T>> out;
    out.reserve(entries_.size());
    for (const auto& e : entries_) out.push_back(e.tensor.values());
    return out;
  }

  void restore(const std::vector<std::vector<T>>& snap) {
    if (snap.size() != entries_.size()) throw ContractError("numerics", "snapshot does not match parameter set");
    for (std::size_t i = 0; i < snap.size(); ++i) {
      auto dst = entries_[i].tensor.data();
      if (dst.size() != snap[i].size()) throw ContractError("numerics", "snapshot entry size mismatch");
      std::copy(snap[i].begin(), snap[i].end(), dst.begin());
    }
  }

  template <typename U>
  ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& e : entries_) {
      auto t = out.add(e.name, e.tensor.template cast<U>(), e.kind);
      t.set_requires_grad(e.tensor.requires_grad());
    }
    return out;
  }

 private:
  const Entry* find(const std::string& name) const {
    for (const auto& e : entries_)
      if (e.name == name) return &e;
    return nullptr;
  }

  std::vector<Entry> entries_;
};

// Looks parameters up by prefixed name, creating and initializing them when
// an Rng is supplied. Without an Rng every parameter must already exist,
// which is how models are rebuilt around a loaded checkpoint.
template <typename T>
class ParamBinder {
 public:
  ParamBinder(ParameterSet<T>& set, std::string prefix, Rng* init) : set_(set), prefix_(std::move(prefix)), init_(init) {}

  ParamBinder child(const std::string& name) const { return ParamBinder(set_, prefix_ + name + ".", init_); }

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  Tensor<T> uniform(const std::string& name, Shape shape, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    return bind(name, std::move(shape), EntryKind::Parameter, [&](Rng& r) { return r.uniform(-bound, bound); });
  }
  Tensor<T> normal(const std::string& name, Shape shape, double stddev) {
    return bind(name, std::move(shape), EntryKind::Parameter, [&](Rng& r) { return r.normal(0.0, stddev); });
  }
  Tensor<T> constant(const std::string& name, Shape shape, double value) {
    return bind(name, std::move(shape), EntryKind::Parameter, [&](Rng&) { return value; });
  }
  Tensor<T> buffer(const std::string& name, Shape shape, double value) {
    return bind(name, std::move(shape), EntryKind::Buffer, [&](Rng&) { return value; });
  }

  const std::string& prefix() const { return prefix_; }
  ParameterSet<T>& set() { return set_; }

 private:
  template <typename F>
  Tensor<T> bind(const std::string& name, Shape shape, EntryKind kind, F&& draw) {
    const std::string full = prefix_ + name;
    if (set_.contains(full)) {
      auto t = set_.get(full);
      if (t.shape() != shape)
        throw DimensionError("numerics", "parameter '" + full + "' has shape " + to_string(t.shape()) +
                                             ", expected " + to_string(shape));
      return t;
    }
    if (init_ == nullptr) throw FormatError("numerics", "missing parameter '" + full + "'");
    std::vector<T> values(numel(shape));
    for (auto& v : values) v = static_cast<T>(draw(*init_));
    return set_.add(full, Tensor<T>(std::move(shape), std::move(values)), kind);
  }

  ParameterSet<T>& set_;
  std::string prefix_;
  Rng* init_;
};

}  // namespace lasan::num
