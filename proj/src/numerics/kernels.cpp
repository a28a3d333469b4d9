#include "lasan/numerics/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <vector>

namespace lasan::num::kernels {

namespace {

std::atomic<int> g_workers{0};

// Range of output positions t with 0 <= t*stride + offset < length, clipped to out_len.
struct Span1d {
  std::size_t lo;
  std::size_t hi;
};

Span1d valid_range(std::ptrdiff_t offset, std::size_t stride, std::size_t length, std::size_t out_len) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const auto len = static_cast<std::ptrdiff_t>(length);
  std::ptrdiff_t lo = 0;
  if (offset < 0) lo = (-offset + s - 1) / s;
  std::ptrdiff_t hi = 0;
  if (len - 1 - offset >= 0) hi = (len - 1 - offset) / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_len));
  if (hi < lo) hi = lo;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

int worker_count() {
  int n = g_workers.load();
  if (n > 0) return n;
  n = omp_get_max_threads();
  if (const char* env = std::getenv("LASAN_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) n = v;
  }
  g_workers.store(n);
  return n;
}

void set_worker_count(int n) { g_workers.store(n > 0 ? n : 0); }

template <typename T>
void transpose(std::size_t rows, std::size_t cols, std::span<const T> in, std::span<T> out) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
}

namespace reference {

template <typename T>
void conv1d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                    std::span<T> y) {
  const std::size_t lo = g.out_length();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t t = 0; t < lo; ++t) {
        T acc = b.empty() ? T{0} : b[co];
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
          for (std::size_t k = 0; k < g.kernel; ++k) {
            const auto pos = static_cast<std::ptrdiff_t>(t * g.stride + k) - static_cast<std::ptrdiff_t>(g.padding);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(g.length)) continue;
            acc += w[(co * g.in_channels + ci) * g.kernel + k] *
                   x[(n * g.in_channels + ci) * g.length + static_cast<std::size_t>(pos)];
          }
        y[(n * g.out_channels + co) * lo + t] = acc;
      }
}

template <typename T>
void conv1d_backward_input(const ConvGeometry& g, std::span<const T> w, std::span<const T> gy, std::span<T> gx) {
  const std::size_t lo = g.out_length();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t t = 0; t < lo; ++t) {
        const T gv = gy[(n * g.out_channels + co) * lo + t];
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
          for (std::size_t k = 0; k < g.kernel; ++k) {
            const auto pos = static_cast<std::ptrdiff_t>(t * g.stride + k) - static_cast<std::ptrdiff_t>(g.padding);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(g.length)) continue;
            gx[(n * g.in_channels + ci) * g.length + static_cast<std::size_t>(pos)] +=
                gv * w[(co * g.in_channels + ci) * g.kernel + k];
          }
      }
}

template <typename T>
void conv1d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> gy, std::span<T> gw,
                            std::span<T> gb) {
  const std::size_t lo = g.out_length();
  for (std::size_t n = 0; n < g.batch; ++n)
    for (std::size_t co = 0; co < g.out_channels; ++co)
      for (std::size_t t = 0; t < lo; ++t) {
        const T gv = gy[(n * g.out_channels + co) * lo + t];
        if (!gb.empty()) gb[co] += gv;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci)
          for (std::size_t k = 0; k < g.kernel; ++k) {
            const auto pos = static_cast<std::ptrdiff_t>(t * g.stride + k) - static_cast<std::ptrdiff_t>(g.padding);
            if (pos < 0 || pos >= static_cast<std::ptrdiff_t>(g.length)) continue;
            gw[(co * g.in_channels + ci) * g.kernel + k] +=
                gv * x[(n * g.in_channels + ci) * g.length + static_cast<std::size_t>(pos)];
          }
      }
}

template <typename T>
void gemm_nt(const GemmShape& s, std::span<const T> a, std::span<const T> bt, std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < s.m; ++i)
    for (std::size_t j = 0; j < s.n; ++j) {
      T acc{0};
      for (std::size_t k = 0; k < s.k; ++k) acc += a[i * s.k + k] * bt[j * s.k + k];
      c[i * s.n + j] = accumulate ? c[i * s.n + j] + acc : acc;
    }
}

}  // namespace reference

namespace parallel {

namespace {

constexpr std::size_t kTile = 64;

// Output positions whose whole receptive field lies inside the input:
// t - padding >= 0 and t - padding + kernel - 1 < length (stride 1).
Span1d interior_forward(const ConvGeometry& g) {
  const std::size_t lo = g.out_length();
  if (g.length + g.padding < g.kernel) return {0, 0};
  const std::size_t a = std::min(g.padding, lo);
  const std::size_t b = std::min(lo, g.length + g.padding - g.kernel + 1);
  return {a, std::max(a, b)};
}

// Input positions s that every tap maps to a valid output (stride 1):
// s + padding - (kernel - 1) >= 0 and s + padding < out_length.
Span1d interior_backward(const ConvGeometry& g) {
  const std::size_t lo = g.out_length();
  const std::size_t a = std::min(g.length, g.kernel - 1 > g.padding ? g.kernel - 1 - g.padding : 0);
  const std::size_t b = lo > g.padding ? std::min(g.length, lo - g.padding) : 0;
  return {a, std::max(a, b)};
}

// Strided convolutions are rewritten as a sum over stride phases: with
// k = q*stride + r, x[t*stride - padding + k] = phase_r[t + q], where
// phase_r[j] = x[j*stride + r - padding] (zero outside the signal). Each phase
// is then a branch-free stride-1 correlation.
template <typename T>
struct Polyphase {
  std::size_t stride, taps, plen;
  std::vector<T> data;  // [batch][channels][stride][plen]

  Polyphase(const ConvGeometry& g, std::span<const T> x, std::size_t channels)
      : stride(g.stride), taps((g.kernel + g.stride - 1) / g.stride), plen(g.out_length() + taps - 1) {
    data.assign(g.batch * channels * stride * plen, T{0});
    const auto pad = static_cast<std::ptrdiff_t>(g.padding);
    const auto len = static_cast<std::ptrdiff_t>(g.length);
    for (std::size_t row = 0; row < g.batch * channels; ++row) {
      const T* in = x.data() + row * g.length;
      for (std::size_t r = 0; r < stride; ++r) {
        T* dst = phase(row, r);
        for (std::size_t j = 0; j < plen; ++j) {
          const auto pos = static_cast<std::ptrdiff_t>(j * stride + r) - pad;
          if (pos >= 0 && pos < len) dst[j] = in[pos];
        }
      }
    }
  }
  T* phase(std::size_t row, std::size_t r) { return data.data() + (row * stride + r) * plen; }
};

template <typename T>
void strided_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                     std::span<T> y) {
  const std::size_t lo = g.out_length();
  Polyphase<T> ph(g, x, g.in_channels);
  const auto rows = static_cast<std::ptrdiff_t>(g.batch * g.out_channels);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t row = 0; row < rows; ++row) {
    const std::size_t n = static_cast<std::size_t>(row) / g.out_channels;
    const std::size_t co = static_cast<std::size_t>(row) % g.out_channels;
    const T bias = b.empty() ? T{0} : b[co];
    const T* w0 = w.data() + co * g.in_channels * g.kernel;
    T* out = y.data() + static_cast<std::size_t>(row) * lo;
    for (std::size_t t = 0; t < lo; t += kTile) {
      const std::size_t m = std::min(kTile, lo - t);
      T acc[kTile];
      for (std::size_t i = 0; i < kTile; ++i) acc[i] = bias;
      for (std::size_t ci = 0; ci < g.in_channels; ++ci)
        for (std::size_t r = 0; r < ph.stride; ++r) {
          const T* src = ph.phase(n * g.in_channels + ci, r) + t;
          for (std::size_t q = 0; q < ph.taps && q * ph.stride + r < g.kernel; ++q) {
            const T wv = w0[ci * g.kernel + q * ph.stride + r];
#pragma omp simd
            for (std::size_t i = 0; i < m; ++i) acc[i] += wv * src[q + i];
          }
        }
      std::copy(acc, acc + m, out + t);
    }
  }
}

template <typename T>
void strided_backward_input(const ConvGeometry& g, std::span<const T> w, std::span<const T> gy, std::span<T> gx) {
  const std::size_t lo = g.out_length();
  const std::size_t s = g.stride;
  const std::size_t taps = (g.kernel + s - 1) / s;
  const std::size_t plen = lo + taps - 1;
  // Output gradient rows padded with taps-1 zeros on both sides.
  const std::size_t glen = lo + 2 * (taps - 1);
  std::vector<T> gp(g.batch * g.out_channels * glen, T{0});
  for (std::size_t row = 0; row < g.batch * g.out_channels; ++row)
    std::copy_n(gy.data() + row * lo, lo, gp.data() + row * glen + (taps - 1));
  const auto rows = static_cast<std::ptrdiff_t>(g.batch * g.in_channels);
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const auto len = static_cast<std::ptrdiff_t>(g.length);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t row = 0; row < rows; ++row) {
    const std::size_t n = static_cast<std::size_t>(row) / g.in_channels;
    const std::size_t ci = static_cast<std::size_t>(row) % g.in_channels;
    T* dst = gx.data() + static_cast<std::size_t>(row) * g.length;
    for (std::size_t r = 0; r < s; ++r)
      for (std::size_t j = 0; j < plen; j += kTile) {
        const std::size_t m = std::min(kTile, plen - j);
        T acc[kTile] = {};
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          const T* grow = gp.data() + (n * g.out_channels + co) * glen + (taps - 1) + j;
          const T* wk = w.data() + (co * g.in_channels + ci) * g.kernel;
          for (std::size_t q = 0; q < taps && q * s + r < g.kernel; ++q) {
            const T wv = wk[q * s + r];
            const T* src = grow - static_cast<std::ptrdiff_t>(q);
#pragma omp simd
            for (std::size_t i = 0; i < m; ++i) acc[i] += wv * src[i];
          }
        }
        for (std::size_t i = 0; i < m; ++i) {
          const auto pos = static_cast<std::ptrdiff_t>((j + i) * s + r) - pad;
          if (pos >= 0 && pos < len) dst[pos] += acc[i];
        }
      }
  }
}

template <typename T>
void strided_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> gy, std::span<T> gw,
                             std::span<T> gb) {
  const std::size_t lo = g.out_length();
  Polyphase<T> ph(g, x, g.in_channels);
  const auto cos = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t cs = 0; cs < cos; ++cs) {
    const auto co = static_cast<std::size_t>(cs);
    std::vector<T> local(g.in_channels * g.kernel, T{0});
    T bacc{0};
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* grow = gy.data() + (n * g.out_channels + co) * lo;
      if (!gb.empty()) {
#pragma omp simd reduction(+ : bacc)
        for (std::size_t t = 0; t < lo; ++t) bacc += grow[t];
      }
      for (std::size_t ci = 0; ci < g.in_channels; ++ci)
        for (std::size_t k = 0; k < g.kernel; ++k) {
          const T* src = ph.phase(n * g.in_channels + ci, k % ph.stride) + k / ph.stride;
          T acc{0};
#pragma omp simd reduction(+ : acc)
          for (std::size_t t = 0; t < lo; ++t) acc += grow[t] * src[t];
          local[ci * g.kernel + k] += acc;
        }
    }
    if (!gb.empty()) gb[co] += bacc;
    for (std::size_t i = 0; i < local.size(); ++i) gw[co * g.in_channels * g.kernel + i] += local[i];
  }
}

}  // namespace

template <typename T>
void conv1d_forward(const ConvGeometry& g, std::span<const T> x, std::span<const T> w, std::span<const T> b,
                    std::span<T> y) {
  if (g.stride > 1) return strided_forward(g, x, w, b, y);
  const std::size_t lo = g.out_length();
  const auto rows = static_cast<std::ptrdiff_t>(g.batch * g.out_channels);
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const Span1d inner = g.stride == 1 ? interior_forward(g) : Span1d{0, 0};
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t n = static_cast<std::size_t>(r) / g.out_channels;
    const std::size_t co = static_cast<std::size_t>(r) % g.out_channels;
    const T bias = b.empty() ? T{0} : b[co];
    const T* in0 = x.data() + n * g.in_channels * g.length;
    const T* w0 = w.data() + co * g.in_channels * g.kernel;
    T* out = y.data() + static_cast<std::size_t>(r) * lo;
    std::size_t t = inner.lo;
    // Register tile: all taps of all input channels accumulate into kTile
    // outputs before a single store.
    for (; t < inner.hi; t += kTile) {
      const std::size_t m = std::min(kTile, inner.hi - t);
      T acc[kTile];
      for (std::size_t i = 0; i < kTile; ++i) acc[i] = bias;
      for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        const T* src = in0 + ci * g.length + (static_cast<std::ptrdiff_t>(t) - pad);
        const T* wk = w0 + ci * g.kernel;
        for (std::size_t k = 0; k < g.kernel; ++k) {
          const T wv = wk[k];
          if (m == kTile) {
#pragma omp simd
            for (std::size_t i = 0; i < kTile; ++i) acc[i] += wv * src[k + i];
          } else {
#pragma omp simd
            for (std::size_t i = 0; i < m; ++i) acc[i] += wv * src[k + i];
          }
        }
      }
      std::copy(acc, acc + m, out + t);
    }
    // Borders and the tail: per-element with bounds checks.
    auto edge = [&](std::size_t t0, std::size_t t1) {
      for (std::size_t tt = t0; tt < t1; ++tt) {
        T acc = bias;
        const auto base = static_cast<std::ptrdiff_t>(tt * g.stride) - pad;
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
          const T* in = in0 + ci * g.length;
          const T* wk = w0 + ci * g.kernel;
          for (std::size_t k = 0; k < g.kernel; ++k) {
            const auto pos = base + static_cast<std::ptrdiff_t>(k);
            if (pos >= 0 && pos < static_cast<std::ptrdiff_t>(g.length)) acc += wk[k] * in[pos];
          }
        }
        out[tt] = acc;
      }
    };
    edge(0, inner.lo);
    edge(inner.hi, lo);
  }
}

template <typename T>
void conv1d_backward_input(const ConvGeometry& g, std::span<const T> w, std::span<const T> gy, std::span<T> gx) {
  if (g.stride > 1) return strided_backward_input(g, w, gy, gx);
  const std::size_t lo = g.out_length();
  const auto rows = static_cast<std::ptrdiff_t>(g.batch * g.in_channels);
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  const Span1d inner = g.stride == 1 ? interior_backward(g) : Span1d{0, 0};
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t r = 0; r < rows; ++r) {
    const std::size_t n = static_cast<std::size_t>(r) / g.in_channels;
    const std::size_t ci = static_cast<std::size_t>(r) % g.in_channels;
    T* dst = gx.data() + static_cast<std::size_t>(r) * g.length;
    const T* gy0 = gy.data() + n * g.out_channels * lo;
    if (g.stride == 1) {
      std::size_t s = inner.lo;
      // gx[s] += sum_co sum_k w[co, ci, k] * gy[co, s + pad - k]
      for (; s < inner.hi; s += kTile) {
        const std::size_t m = std::min(kTile, inner.hi - s);
        T acc[kTile] = {};
        for (std::size_t co = 0; co < g.out_channels; ++co) {
          const T* grow = gy0 + co * lo + (static_cast<std::ptrdiff_t>(s) + pad);
          const T* wk = w.data() + (co * g.in_channels + ci) * g.kernel;
          for (std::size_t k = 0; k < g.kernel; ++k) {
            const T wv = wk[k];
            const T* src = grow - static_cast<std::ptrdiff_t>(k);
            if (m == kTile) {
#pragma omp simd
              for (std::size_t i = 0; i < kTile; ++i) acc[i] += wv * src[i];
            } else {
#pragma omp simd
              for (std::size_t i = 0; i < m; ++i) acc[i] += wv * src[i];
            }
          }
        }
        for (std::size_t i = 0; i < m; ++i) dst[s + i] += acc[i];
      }
      auto edge = [&](std::size_t s0, std::size_t s1) {
        for (std::size_t ss = s0; ss < s1; ++ss) {
          T acc{0};
          for (std::size_t co = 0; co < g.out_channels; ++co) {
            const T* grow = gy0 + co * lo;
            const T* wk = w.data() + (co * g.in_channels + ci) * g.kernel;
            for (std::size_t k = 0; k < g.kernel; ++k) {
              const auto t = static_cast<std::ptrdiff_t>(ss) + pad - static_cast<std::ptrdiff_t>(k);
              if (t >= 0 && t < static_cast<std::ptrdiff_t>(lo)) acc += wk[k] * grow[t];
            }
          }
          dst[ss] += acc;
        }
      };
      edge(0, inner.lo);
      edge(inner.hi, g.length);
      continue;
    }
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const T* grow = gy0 + co * lo;
      const T* wk = w.data() + (co * g.in_channels + ci) * g.kernel;
      for (std::size_t k = 0; k < g.kernel; ++k) {
        const auto offset = static_cast<std::ptrdiff_t>(k) - pad;
        const auto [t0, t1] = valid_range(offset, g.stride, g.length, lo);
        const T wv = wk[k];
        for (std::size_t t = t0; t < t1; ++t) dst[static_cast<std::ptrdiff_t>(t * g.stride) + offset] += wv * grow[t];
      }
    }
  }
}

template <typename T>
void conv1d_backward_weight(const ConvGeometry& g, std::span<const T> x, std::span<const T> gy, std::span<T> gw,
                            std::span<T> gb) {
  if (g.stride > 1) return strided_backward_weight(g, x, gy, gw, gb);
  const std::size_t lo = g.out_length();
  const auto cos = static_cast<std::ptrdiff_t>(g.out_channels);
#pragma omp parallel for schedule(static) num_threads(worker_count())
  for (std::ptrdiff_t cs = 0; cs < cos; ++cs) {
    const auto co = static_cast<std::size_t>(cs);
    if (!gb.empty()) {
      T acc{0};
      for (std::size_t n = 0; n < g.batch; ++n) {
        const T* grow = gy.data() + (n * g.out_channels + co) * lo;
#pragma omp simd reduction(+ : acc)
        for (std::size_t t = 0; t < lo; ++t) acc += grow[t];
      }
      gb[co] += acc;
    }
    // Batch-outer order keeps one gradient row and one input row hot while
    // all taps are accumulated.
    std::vector<T> local(g.in_channels * g.kernel, T{0});
    for (std::size_t n = 0; n < g.batch; ++n) {
      const T* grow = gy.data() + (n * g.out_channels + co) * lo;
      for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
        const T* in = x.data() + (n * g.in_channels + ci) * g.length;
        for (std::size_t k = 0; k < g.kernel; ++k) {
          const auto offset = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(g.padding);
          const auto [t0, t1] = valid_range(offset, g.stride, g.length, lo);
          T acc{0};
          if (g.stride == 1) {
            const T* src = in + (static_cast<std::ptrdiff_t>(t0) + offset);
            const T* gr = grow + t0;
            const std::size_t count = t1 - t0;
#pragma omp simd reduction(+ : acc)
            for (std::size_t i = 0; i < count; ++i) acc += gr[i] * src[i];
          } else {
            for (std::size_t t = t0; t < t1; ++t) acc += grow[t] * in[static_cast<std::ptrdiff_t>(t * g.stride) + offset];
          }
          local[ci * g.kernel + k] += acc;
        }
      }
    }
    for (std::size_t i = 0; i < local.size(); ++i) gw[co * g.in_channels * g.kernel + i] += local[i];
  }
}

template <typename T>
void gemm_nt(const GemmShape& s, std::span<const T> a, std::span<const T> bt, std::span<T> c, bool accumulate) {
  const auto cells = static_cast<std::ptrdiff_t>(s.m * s.n);
#pragma omp parallel for schedule(static) num_threads(worker_count()) if (cells > 64)
  for (std::ptrdiff_t idx = 0; idx < cells; ++idx) {
    const std::size_t i = static_cast<std::size_t>(idx) / s.n;
    const std::size_t j = static_cast<std::size_t>(idx) % s.n;
    const T* ar = a.data() + i * s.k;
    const T* br = bt.data() + j * s.k;
    T acc{0};
#pragma omp simd reduction(+ : acc)
    for (std::size_t k = 0; k < s.k; ++k) acc += ar[k] * br[k];
    c[static_cast<std::size_t>(idx)] = accumulate ? c[static_cast<std::size_t>(idx)] + acc : acc;
  }
}

}  // namespace parallel

#define LASAN_INSTANTIATE_KERNELS(T)                                                                           \
  template void transpose<T>(std::size_t, std::size_t, std::span<const T>, std::span<T>);                     \
  namespace reference {                                                                                       \
  template void conv1d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,                 \
                                  std::span<const T>, std::span<T>);                                          \
  template void conv1d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,          \
                                         std::span<T>);                                                       \
  template void conv1d_backward_weight<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,         \
                                          std::span<T>, std::span<T>);                                        \
  template void gemm_nt<T>(const GemmShape&, std::span<const T>, std::span<const T>, std::span<T>, bool);      \
  }                                                                                                           \
  namespace parallel {                                                                                        \
  template void conv1d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,                 \
                                  std::span<const T>, std::span<T>);                                          \
  template void conv1d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,          \
                                         std::span<T>);                                                       \
  template void conv1d_backward_weight<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,         \
                                          std::span<T>, std::span<T>);                                        \
  template void gemm_nt<T>(const GemmShape&, std::span<const T>, std::span<const T>, std::span<T>, bool);      \
  }

LASAN_INSTANTIATE_KERNELS(float)
LASAN_INSTANTIATE_KERNELS(double)

}  // namespace lasan::num::kernels
