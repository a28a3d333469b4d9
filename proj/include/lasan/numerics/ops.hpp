#pragma once

#include <cstddef>
#include <vector>

#include "lasan/numerics/tensor.hpp"
#include "lasan/numerics/trace.hpp"
#include "lasan/rng.hpp"

// Differentiable operations. Each op computes its output eagerly and records a
// backward closure on the trace when any input requires gradients.
//
// Binary elementwise ops (add/sub/mul) accept a second operand whose shape is
// equal to, or a trailing suffix of, the first operand's shape; the second
// operand is then broadcast over the leading axes.
namespace lasan::num {

// x: [N, C_in, L] (or [C_in, L]); w: [C_out, C_in, K]; b: [C_out] or undefined.
template <typename T>
Tensor<T> conv1d(Trace<T>& tr, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                 std::size_t padding);

// x: [..., in]; w: [out, in]; b: [out] or undefined.
template <typename T>
Tensor<T> linear(Trace<T>& tr, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

// a: [..., M, K]; b: [..., K, N], or [..., N, K] when transpose_b. Leading axes must match.
template <typename T>
Tensor<T> matmul(Trace<T>& tr, const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

template <typename T>
Tensor<T> add(Trace<T>& tr, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(Trace<T>& tr, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(Trace<T>& tr, const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> scale(Trace<T>& tr, const Tensor<T>& x, T factor);

template <typename T>
Tensor<T> relu(Trace<T>& tr, const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(Trace<T>& tr, const Tensor<T>& x);
// Softmax along the last axis.
template <typename T>
Tensor<T> softmax(Trace<T>& tr, const Tensor<T>& x);

// Normalizes over the last axis; gamma/beta have the last axis' extent.
template <typename T>
Tensor<T> layer_norm(Trace<T>& tr, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     T eps = T(1e-5));

struct BatchNormOptions {
  bool training = true;
  double eps = 1e-5;
  double momentum = 0.1;
};

// x: [N, C, L]. Per-channel statistics over batch and time. In training mode
// the batch statistics are used and the running buffers are updated in
// place; in eval mode the running buffers are used.
template <typename T>
Tensor<T> batch_norm(Trace<T>& tr, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, const BatchNormOptions& opt);

// x: [N, C, L] -> [N, C, floor(L / 2)], window 2, stride 2.
template <typename T>
Tensor<T> maxpool1d(Trace<T>& tr, const Tensor<T>& x);

// x: [N, C, L] -> [N, C], mean over L.
template <typename T>
Tensor<T> global_avg_pool(Trace<T>& tr, const Tensor<T>& x);

// Train mode: Bernoulli keep-mask scaled by 1/(1-p). Eval mode: identity.
template <typename T>
Tensor<T> dropout(Trace<T>& tr, const Tensor<T>& x, double p, bool training, Rng& rng);

// Concatenation along the last axis; leading axes must match.
template <typename T>
Tensor<T> concat(Trace<T>& tr, const std::vector<Tensor<T>>& parts);

// table: [V, D]; returns [indices.size(), D].
template <typename T>
Tensor<T> embedding(Trace<T>& tr, const Tensor<T>& table, const std::vector<std::size_t>& indices);

template <typename T>
Tensor<T> reshape(Trace<T>& tr, const Tensor<T>& x, Shape shape);

// out.shape[i] = x.shape[axes[i]].
template <typename T>
Tensor<T> permute(Trace<T>& tr, const Tensor<T>& x, const std::vector<std::size_t>& axes);

template <typename T>
Tensor<T> sum(Trace<T>& tr, const Tensor<T>& x);
template <typename T>
Tensor<T> mean(Trace<T>& tr, const Tensor<T>& x);

template <typename T>
struct AttentionParams {
  Tensor<T> wq, bq, wk, bk, wv, bv, wo, bo;
};

// x: [T, D] or [B, T, D]. Scaled dot-product attention per head with
// head dim D/heads, heads concatenated then output-projected.
template <typename T>
Tensor<T> multi_head_attention(Trace<T>& tr, const Tensor<T>& x, std::size_t heads, const AttentionParams<T>& p);

}  // namespace lasan::num
