#pragma once

#include <cstddef>
#include <span>

namespace lasan::num::kernels {

// Batched 1-D convolution geometry. Input [batch, in_channels, length],
// weight [out_channels, in_channels, kernel], output [batch, out_channels, out_length].
struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t length = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_length() const { return (length + 2 * padding - kernel) / stride + 1; }
};

// c[m, n] = sum_k a[m, k] * bt[n, k]   (accumulate adds into c instead)
struct GemmShape {
  std::size_t m = 1;
  std::size_t n = 1;
  std::size_t k = 1;
};

// Plain loops in canonical index order. Kept as the correctness reference for
// the parallel kernels and for the benchmark.
namespace reference {

template <typename T>
void conv1d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                    std::span<T> y);
template <typename T>
void conv1d_backward_input(const ConvGeometry& g, std::span<const T> w, std::span<const T> gy, std::span<T> gx);
template <typename T>
void conv1d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> gy, std::span<T> gw,
                            std::span<T> gb);
template <typename T>
void gemm_nt(const GemmShape& s, std::span<const T> a, std::span<const T> bt, std::span<T> c, bool accumulate);

}  // namespace reference

// OpenMP kernels. Work is partitioned over independent outputs only, so the
// result does not depend on the thread count.
namespace parallel {

template <typename T>
void conv1d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                    std::span<T> y);
template <typename T>
void conv1d_backward_input(const ConvGeometry& g, std::span<const T> w, std::span<const T> gy, std::span<T> gx);
template <typename T>
void conv1d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> gy, std::span<T> gw,
                            std::span<T> gb);
template <typename T>
void gemm_nt(const GemmShape& s, std::span<const T> a, std::span<const T> bt, std::span<T> c, bool accumulate);

}  // namespace parallel

// out[c, r] = in[r, c] for a rows x cols matrix.
template <typename T>
void transpose(std::size_t rows, std::size_t cols, std::span<const T> in, std::span<T> out);

// Number of OpenMP workers; honours LASAN_THREADS when set.
int worker_count();
void set_worker_count(int n);

}  // namespace lasan::num::kernels
