#pragma once

#include <string>

#include "lasan/model/spec.hpp"
#include "lasan/numerics/params.hpp"
#include "lasan/numerics/trace.hpp"
#include "lasan/rng.hpp"

namespace lasan::model {

// Batched model inputs, both [B, 8, 2500]. `native` is the z-scored 250 Hz
// signal; `foundation` is the resampled view consumed by foundation
// encoders. A model reads only the views it declares it needs.
template <typename T>
struct ModelInputs {
  num::Tensor<T> native;
  num::Tensor<T> foundation;
};

template <typename T>
struct ModelOutput {
  num::Tensor<T> logits;      // [B, n_outputs]
  num::Tensor<T> probs;       // softmax rows, or sigmoid for one output
  num::Tensor<T> importance;  // [B, 8] lead weights; undefined without an aggregator
};

template <typename T>
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual ModelOutput<T> forward(num::Trace<T>& tr, const ModelInputs<T>& in, Mode mode, Rng& rng) = 0;
  virtual num::ParameterSet<T>& params() = 0;
  virtual std::size_t n_outputs() const = 0;
  virtual bool needs_native() const = 0;
  virtual bool needs_foundation() const = 0;
  // Describes the model (spec, kind, encoder) for checkpoint headers.
  virtual KvList describe() const = 0;
};

}  // namespace lasan::model
