#include "lasan/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lasan/numerics/kernels.hpp"

namespace lasan::num {

namespace {

constexpr const char* kModule = "numerics";

std::size_t rows_of(const Shape& s) { return numel(s) / s.back(); }

// Number of times b repeats inside a under suffix broadcasting.
template <typename T>
std::size_t broadcast_repeats(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  if (sb.size() > sa.size() || !std::equal(sb.rbegin(), sb.rend(), sa.rbegin()))
    throw DimensionError(kModule, std::string(op) + ": cannot broadcast " + to_string(sb) + " onto " + to_string(sa));
  return a.numel() / b.numel();
}

// Sums a [repeats x n] gradient into an n-vector.
template <typename T>
std::vector<T> reduce_repeats(std::span<const T> g, std::size_t repeats, std::size_t n) {
  std::vector<T> out(n, T{0});
  for (std::size_t r = 0; r < repeats; ++r)
    for (std::size_t i = 0; i < n; ++i) out[i] += g[r * n + i];
  return out;
}

}  // namespace

template <typename T>
Tensor<T> conv1d(Trace<T>& tr, const Tensor<T>& x_in, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride,
                 std::size_t padding) {
  const bool unbatched = x_in.dim() == 2;
  if (!unbatched && x_in.dim() != 3) throw DimensionError(kModule, "conv1d: input must be [C,L] or [N,C,L]");
  if (w.dim() != 3) throw DimensionError(kModule, "conv1d: weight must be [C_out, C_in, K]");
  if (stride == 0) throw ConfigError(kModule, "conv1d: stride must be positive");
  kernels::ConvGeometry g;
  g.batch = unbatched ? 1 : x_in.size(0);
  g.in_channels = x_in.size(unbatched ? 0 : 1);
  g.length = x_in.size(unbatched ? 1 : 2);
  g.out_channels = w.size(0);
  g.kernel = w.size(2);
  g.stride = stride;
  g.padding = padding;
  if (w.size(1) != g.in_channels)
    throw DimensionError(kModule, "conv1d: weight expects " + std::to_string(w.size(1)) + " input channels, got " +
                                      std::to_string(g.in_channels));
  if (b.defined() && b.numel() != g.out_channels) throw DimensionError(kModule, "conv1d: bias size mismatch");
  if (g.kernel > g.length + 2 * padding) throw DimensionError(kModule, "conv1d: kernel longer than padded input");

  const std::size_t lo = g.out_length();
  Shape out_shape = unbatched ? Shape{g.out_channels, lo} : Shape{g.batch, g.out_channels, lo};
  Tensor<T> y(out_shape);
  const std::span<const T> bias = b.defined() ? b.data() : std::span<const T>{};
  kernels::parallel::conv1d_forward<T>(g, x_in.data(), w.data(), bias, y.data());

  return tr.record("conv1d", y, {x_in, w, b}, [x_in, w, b, g](const Tensor<T>& out) {
    auto gy = out.grad();
    if (x_in.requires_grad()) {
      std::vector<T> gx(x_in.numel(), T{0});
      kernels::parallel::conv1d_backward_input<T>(g, w.data(), gy, gx);
      Tensor<T>(x_in).accumulate_grad(gx);
    }
    const bool need_w = w.requires_grad();
    const bool need_b = b.defined() && b.requires_grad();
    if (need_w || need_b) {
      std::vector<T> gw(w.numel(), T{0});
      std::vector<T> gb(need_b ? b.numel() : 0, T{0});
      kernels::parallel::conv1d_backward_weight<T>(g, x_in.data(), gy, gw, gb);
      if (need_w) Tensor<T>(w).accumulate_grad(gw);
      if (need_b) Tensor<T>(b).accumulate_grad(gb);
    }
  });
}

template <typename T>
Tensor<T> linear(Trace<T>& tr, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (w.dim() != 2) throw DimensionError(kModule, "linear: weight must be [out, in]");
  const std::size_t in = w.size(1);
  const std::size_t out_f = w.size(0);
  if (x.shape().back() != in)
    throw DimensionError(kModule, "linear: input " + to_string(x.shape()) + " vs weight " + to_string(w.shape()));
  if (b.defined() && b.numel() != out_f) throw DimensionError(kModule, "linear: bias size mismatch");
  const std::size_t rows = rows_of(x.shape());
  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  Tensor<T> y(out_shape);
  kernels::parallel::gemm_nt<T>({rows, out_f, in}, x.data(), w.data(), y.data(), false);
  if (b.defined()) {
    auto yd = y.data();
    auto bd = b.data();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < out_f; ++j) yd[r * out_f + j] += bd[j];
  }
  return tr.record("linear", y, {x, w, b}, [x, w, b, rows, in, out_f](const Tensor<T>& out) {
    auto gy = out.grad();
    if (x.requires_grad()) {
      std::vector<T> wt(in * out_f);
      kernels::transpose<T>(out_f, in, w.data(), wt);
      std::vector<T> gx(rows * in);
      kernels::parallel::gemm_nt<T>({rows, in, out_f}, gy, wt, gx, false);
      Tensor<T>(x).accumulate_grad(gx);
    }
    if (w.requires_grad()) {
      std::vector<T> gyt(out_f * rows);
      std::vector<T> xt(in * rows);
      kernels::transpose<T>(rows, out_f, gy, gyt);
      kernels::transpose<T>(rows, in, x.data(), xt);
      std::vector<T> gw(out_f * in);
      kernels::parallel::gemm_nt<T>({out_f, in, rows}, gyt, xt, gw, false);
      Tensor<T>(w).accumulate_grad(gw);
    }
    if (b.defined() && b.requires_grad()) Tensor<T>(b).accumulate_grad(reduce_repeats<T>(gy, rows, out_f));
  });
}

template <typename T>
Tensor<T> matmul(Trace<T>& tr, const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  if (a.dim() < 2 || a.dim() != b.dim()) throw DimensionError(kModule, "matmul: rank mismatch");
  const std::size_t r = a.dim();
  for (std::size_t i = 0; i + 2 < r; ++i)
    if (a.size(i) != b.size(i)) throw DimensionError(kModule, "matmul: batch axes differ");
  const std::size_t m = a.size(r - 2);
  const std::size_t k = a.size(r - 1);
  const std::size_t n = transpose_b ? b.size(r - 2) : b.size(r - 1);
  const std::size_t kb = transpose_b ? b.size(r - 1) : b.size(r - 2);
  if (k != kb)
    throw DimensionError(kModule, "matmul: inner extents " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  const std::size_t batches = a.numel() / (m * k);
  Shape out_shape = a.shape();
  out_shape.back() = n;
  Tensor<T> y(out_shape);
  {
    std::vector<T> bt(n * k);
    for (std::size_t bi = 0; bi < batches; ++bi) {
      auto as = a.data().subspan(bi * m * k, m * k);
      auto bs = b.data().subspan(bi * k * n, k * n);
      std::span<const T> btv = bs;
      if (!transpose_b) {
        kernels::transpose<T>(k, n, bs, bt);
        btv = bt;
      }
      kernels::parallel::gemm_nt<T>({m, n, k}, as, btv, y.data().subspan(bi * m * n, m * n), false);
    }
  }
  return tr.record("matmul", y, {a, b}, [a, b, transpose_b, batches, m, n, k](const Tensor<T>& out) {
    auto gy = out.grad();
    std::vector<T> ga(a.requires_grad() ? a.numel() : 0);
    std::vector<T> gb(b.requires_grad() ? b.numel() : 0);
    std::vector<T> s1, s2;
    for (std::size_t bi = 0; bi < batches; ++bi) {
      auto gys = gy.subspan(bi * m * n, m * n);
      auto as = a.data().subspan(bi * m * k, m * k);
      auto bs = b.data().subspan(bi * k * n, k * n);
      if (!ga.empty()) {
        std::span<T> out_a(ga.data() + bi * m * k, m * k);
        if (!transpose_b) {
          // ga[i,kk] = sum_j gy[i,j] b[kk,j]
          kernels::parallel::gemm_nt<T>({m, k, n}, gys, bs, out_a, false);
        } else {
          s1.resize(k * n);
          kernels::transpose<T>(n, k, bs, s1);
          kernels::parallel::gemm_nt<T>({m, k, n}, gys, s1, out_a, false);
        }
      }
      if (!gb.empty()) {
        std::span<T> out_b(gb.data() + bi * k * n, k * n);
        s1.resize(k * m);
        s2.resize(n * m);
        kernels::transpose<T>(m, k, as, s1);   // a^T [k, m]
        kernels::transpose<T>(m, n, gys, s2);  // gy^T [n, m]
        if (!transpose_b) {
          kernels::parallel::gemm_nt<T>({k, n, m}, s1, s2, out_b, false);
        } else {
          kernels::parallel::gemm_nt<T>({n, k, m}, s2, s1, out_b, false);
        }
      }
    }
    if (!ga.empty()) Tensor<T>(a).accumulate_grad(ga);
    if (!gb.empty()) Tensor<T>(b).accumulate_grad(gb);
  });
}

template <typename T>
Tensor<T> add(Trace<T>& tr, const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t reps = broadcast_repeats(a, b, "add");
  const std::size_t n = b.numel();
  Tensor<T> y = a.clone();
  y.set_requires_grad(false);
  auto yd = y.data();
  auto bd = b.data();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t i = 0; i < n; ++i) yd[r * n + i] += bd[i];
  return tr.record("add", y, {a, b}, [a, b, reps, n](const Tensor<T>& out) {
    if (a.requires_grad()) Tensor<T>(a).accumulate_grad(out.grad());
    if (b.requires_grad()) Tensor<T>(b).accumulate_grad(reduce_repeats<T>(out.grad(), reps, n));
  });
}

template <typename T>
Tensor<T> sub(Trace<T>& tr, const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t reps = broadcast_repeats(a, b, "sub");
  const std::size_t n = b.numel();
  Tensor<T> y = a.clone();
  y.set_requires_grad(false);
  auto yd = y.data();
  auto bd = b.data();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t i = 0; i < n; ++i) yd[r * n + i] -= bd[i];
  return tr.record("sub", y, {a, b}, [a, b, reps, n](const Tensor<T>& out) {
    if (a.requires_grad()) Tensor<T>(a).accumulate_grad(out.grad());
    if (b.requires_grad()) {
      auto g = reduce_repeats<T>(out.grad(), reps, n);
      for (auto& v : g) v = -v;
      Tensor<T>(b).accumulate_grad(g);
    }
  });
}

template <typename T>
Tensor<T> mul(Trace<T>& tr, const Tensor<T>& a, const Tensor<T>& b) {
  const std::size_t reps = broadcast_repeats(a, b, "mul");
  const std::size_t n = b.numel();
  Tensor<T> y(a.shape());
  auto yd = y.data();
  auto ad = a.data();
  auto bd = b.data();
  for (std::size_t r = 0; r < reps; ++r)
    for (std::size_t i = 0; i < n; ++i) yd[r * n + i] = ad[r * n + i] * bd[i];
  return tr.record("mul", y, {a, b}, [a, b, reps, n](const Tensor<T>& out) {
    auto g = out.grad();
    auto ad = a.data();
    auto bd = b.data();
    if (a.requires_grad()) {
      std::vector<T> ga(a.numel());
      for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < n; ++i) ga[r * n + i] = g[r * n + i] * bd[i];
      Tensor<T>(a).accumulate_grad(ga);
    }
    if (b.requires_grad()) {
      std::vector<T> gb(n, T{0});
      for (std::size_t r = 0; r < reps; ++r)
        for (std::size_t i = 0; i < n; ++i) gb[i] += g[r * n + i] * ad[r * n + i];
      Tensor<T>(b).accumulate_grad(gb);
    }
  });
}

template <typename T>
Tensor<T> scale(Trace<T>& tr, const Tensor<T>& x, T factor) {
  Tensor<T> y(x.shape());
  auto yd = y.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = xd[i] * factor;
  return tr.record("scale", y, {x}, [x, factor](const Tensor<T>& out) {
    auto g = out.grad();
    std::vector<T> gx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * factor;
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> relu(Trace<T>& tr, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  auto yd = y.data();
  auto xd = x.data();
  // NaN passes through so the stage checks can see it.
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = xd[i] < T{0} ? T{0} : xd[i];
  return tr.record("relu", y, {x}, [x](const Tensor<T>& out) {
    auto g = out.grad();
    auto xd = x.data();
    std::vector<T> gx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = xd[i] > T{0} ? g[i] : T{0};
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> sigmoid(Trace<T>& tr, const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  auto yd = y.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < yd.size(); ++i) {
    const T v = xd[i];
    if (v >= T{0}) {
      yd[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      yd[i] = e / (T{1} + e);
    }
  }
  return tr.record("sigmoid", y, {x}, [x, y](const Tensor<T>& out) {
    auto g = out.grad();
    auto yd = y.data();
    std::vector<T> gx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * yd[i] * (T{1} - yd[i]);
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> softmax(Trace<T>& tr, const Tensor<T>& x) {
  const std::size_t n = x.shape().back();
  const std::size_t rows = rows_of(x.shape());
  Tensor<T> y(x.shape());
  auto yd = y.data();
  auto xd = x.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = xd.data() + r * n;
    T* o = yd.data() + r * n;
    const T mx = *std::max_element(in, in + n);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      o[i] = std::exp(in[i] - mx);
      total += static_cast<double>(o[i]);
    }
    const T inv = static_cast<T>(1.0 / total);
    for (std::size_t i = 0; i < n; ++i) o[i] *= inv;
  }
  return tr.record("softmax", y, {x}, [x, y, rows, n](const Tensor<T>& out) {
    auto g = out.grad();
    auto yd = y.data();
    std::vector<T> gx(g.size());
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(g[r * n + i]) * yd[r * n + i];
      for (std::size_t i = 0; i < n; ++i) gx[r * n + i] = yd[r * n + i] * (g[r * n + i] - static_cast<T>(dot));
    }
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> layer_norm(Trace<T>& tr, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
  const std::size_t n = x.shape().back();
  if (gamma.numel() != n || beta.numel() != n) throw DimensionError(kModule, "layer_norm: affine size mismatch");
  const std::size_t rows = rows_of(x.shape());
  Tensor<T> y(x.shape());
  std::vector<T> xhat(x.numel());
  std::vector<T> inv_std(rows);
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double mu = 0.0;
    for (std::size_t i = 0; i < n; ++i) mu += xd[r * n + i];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = xd[r * n + i] - mu;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double is = 1.0 / std::sqrt(var + static_cast<double>(eps));
    inv_std[r] = static_cast<T>(is);
    for (std::size_t i = 0; i < n; ++i) {
      const T h = static_cast<T>((xd[r * n + i] - mu) * is);
      xhat[r * n + i] = h;
      yd[r * n + i] = h * gamma[i] + beta[i];
    }
  }
  return tr.record("layer_norm", y, {x, gamma, beta},
                   [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), rows, n](const Tensor<T>& out) {
                     auto g = out.grad();
                     if (gamma.requires_grad() || beta.requires_grad()) {
                       std::vector<T> gg(n, T{0}), gb(n, T{0});
                       for (std::size_t r = 0; r < rows; ++r)
                         for (std::size_t i = 0; i < n; ++i) {
                           gg[i] += g[r * n + i] * xhat[r * n + i];
                           gb[i] += g[r * n + i];
                         }
                       if (gamma.requires_grad()) Tensor<T>(gamma).accumulate_grad(gg);
                       if (beta.requires_grad()) Tensor<T>(beta).accumulate_grad(gb);
                     }
                     if (x.requires_grad()) {
                       std::vector<T> gx(x.numel());
                       for (std::size_t r = 0; r < rows; ++r) {
                         double m1 = 0.0, m2 = 0.0;
                         for (std::size_t i = 0; i < n; ++i) {
                           const double gh = static_cast<double>(g[r * n + i]) * gamma[i];
                           m1 += gh;
                           m2 += gh * xhat[r * n + i];
                         }
                         m1 /= static_cast<double>(n);
                         m2 /= static_cast<double>(n);
                         for (std::size_t i = 0; i < n; ++i) {
                           const double gh = static_cast<double>(g[r * n + i]) * gamma[i];
                           gx[r * n + i] = static_cast<T>(inv_std[r] * (gh - m1 - xhat[r * n + i] * m2));
                         }
                       }
                       Tensor<T>(x).accumulate_grad(gx);
                     }
                   });
}

template <typename T>
Tensor<T> batch_norm(Trace<T>& tr, const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                     Tensor<T>& running_mean, Tensor<T>& running_var, const BatchNormOptions& opt) {
  if (x.dim() != 3) throw DimensionError(kModule, "batch_norm: input must be [N, C, L]");
  const std::size_t nb = x.size(0), c = x.size(1), len = x.size(2);
  if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c || running_var.numel() != c)
    throw DimensionError(kModule, "batch_norm: channel size mismatch");
  const std::size_t count = nb * len;
  std::vector<T> scale_c(c), shift_c(c), inv_std(c), mean_c(c);
  auto xd = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mu, var;
    if (opt.training) {
      double s = 0.0;
      for (std::size_t n = 0; n < nb; ++n) {
        const T* row = xd.data() + (n * c + ch) * len;
#pragma omp simd reduction(+ : s)
        for (std::size_t t = 0; t < len; ++t) s += row[t];
      }
      mu = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t n = 0; n < nb; ++n) {
        const T* row = xd.data() + (n * c + ch) * len;
#pragma omp simd reduction(+ : v)
        for (std::size_t t = 0; t < len; ++t) {
          const double d = row[t] - mu;
          v += d * d;
        }
      }
      var = v / static_cast<double>(count);
      const double unbiased = count > 1 ? v / static_cast<double>(count - 1) : var;
      auto rm = running_mean.data();
      auto rv = running_var.data();
      rm[ch] = static_cast<T>((1.0 - opt.momentum) * rm[ch] + opt.momentum * mu);
      rv[ch] = static_cast<T>((1.0 - opt.momentum) * rv[ch] + opt.momentum * unbiased);
    } else {
      mu = running_mean[ch];
      var = running_var[ch];
    }
    const double is = 1.0 / std::sqrt(var + opt.eps);
    mean_c[ch] = static_cast<T>(mu);
    inv_std[ch] = static_cast<T>(is);
    scale_c[ch] = static_cast<T>(gamma[ch] * is);
    shift_c[ch] = static_cast<T>(beta[ch] - gamma[ch] * mu * is);
  }
  Tensor<T> y(x.shape());
  auto yd = y.data();
  for (std::size_t n = 0; n < nb; ++n)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T a = scale_c[ch], b = shift_c[ch];
      const std::size_t off = (n * c + ch) * len;
      for (std::size_t t = 0; t < len; ++t) yd[off + t] = xd[off + t] * a + b;
    }
  const bool training = opt.training;
  return tr.record(
      "batch_norm", y, {x, gamma, beta},
      [x, gamma, beta, inv_std = std::move(inv_std), mean_c = std::move(mean_c), nb, c, len, count,
       training](const Tensor<T>& out) {
        auto g = out.grad();
        auto xd = x.data();
        std::vector<T> gg(c, T{0}), gbt(c, T{0});
        std::vector<double> m1(c, 0.0), m2(c, 0.0);
        for (std::size_t ch = 0; ch < c; ++ch) {
          double sg = 0.0, sgx = 0.0;
          const double mu = mean_c[ch], is = inv_std[ch];
          for (std::size_t n = 0; n < nb; ++n) {
            const T* xr = xd.data() + (n * c + ch) * len;
            const T* gr = g.data() + (n * c + ch) * len;
#pragma omp simd reduction(+ : sg, sgx)
            for (std::size_t t = 0; t < len; ++t) {
              const double xh = (static_cast<double>(xr[t]) - mu) * is;
              sg += gr[t];
              sgx += gr[t] * xh;
            }
          }
          gg[ch] = static_cast<T>(sgx);
          gbt[ch] = static_cast<T>(sg);
          m1[ch] = sg / static_cast<double>(count);
          m2[ch] = sgx / static_cast<double>(count);
        }
        if (gamma.requires_grad()) Tensor<T>(gamma).accumulate_grad(gg);
        if (beta.requires_grad()) Tensor<T>(beta).accumulate_grad(gbt);
        if (x.requires_grad()) {
          std::vector<T> gx(x.numel());
          for (std::size_t n = 0; n < nb; ++n)
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double k = static_cast<double>(gamma[ch]) * inv_std[ch];
              const double mu = mean_c[ch], is = inv_std[ch], a1 = m1[ch], a2 = m2[ch];
              const std::size_t off = (n * c + ch) * len;
              const T* xr = xd.data() + off;
              const T* gr = g.data() + off;
              T* dst = gx.data() + off;
              if (training) {
#pragma omp simd
                for (std::size_t t = 0; t < len; ++t) {
                  const double xh = (static_cast<double>(xr[t]) - mu) * is;
                  dst[t] = static_cast<T>(k * (gr[t] - a1 - xh * a2));
                }
              } else {
#pragma omp simd
                for (std::size_t t = 0; t < len; ++t) dst[t] = static_cast<T>(k * gr[t]);
              }
            }
          Tensor<T>(x).accumulate_grad(gx);
        }
      });
}

template <typename T>
Tensor<T> maxpool1d(Trace<T>& tr, const Tensor<T>& x) {
  if (x.dim() != 3) throw DimensionError(kModule, "maxpool1d: input must be [N, C, L]");
  const std::size_t rows = x.size(0) * x.size(1);
  const std::size_t len = x.size(2);
  const std::size_t lo = len / 2;
  if (lo == 0) throw DimensionError(kModule, "maxpool1d: input shorter than the window");
  Tensor<T> y(Shape{x.size(0), x.size(1), lo});
  std::vector<std::uint32_t> arg(rows * lo);
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < lo; ++t) {
      const std::size_t i0 = r * len + 2 * t;
      const bool second = xd[i0 + 1] > xd[i0] || std::isnan(xd[i0 + 1]);
      arg[r * lo + t] = static_cast<std::uint32_t>(second ? i0 + 1 : i0);
      yd[r * lo + t] = second ? xd[i0 + 1] : xd[i0];
    }
  return tr.record("maxpool1d", y, {x}, [x, arg = std::move(arg)](const Tensor<T>& out) {
    auto g = out.grad();
    std::vector<T> gx(x.numel(), T{0});
    for (std::size_t i = 0; i < g.size(); ++i) gx[arg[i]] += g[i];
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> global_avg_pool(Trace<T>& tr, const Tensor<T>& x) {
  if (x.dim() != 3) throw DimensionError(kModule, "global_avg_pool: input must be [N, C, L]");
  const std::size_t rows = x.size(0) * x.size(1);
  const std::size_t len = x.size(2);
  Tensor<T> y(Shape{x.size(0), x.size(1)});
  auto xd = x.data();
  auto yd = y.data();
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t t = 0; t < len; ++t) s += xd[r * len + t];
    yd[r] = static_cast<T>(s / static_cast<double>(len));
  }
  return tr.record("global_avg_pool", y, {x}, [x, rows, len](const Tensor<T>& out) {
    auto g = out.grad();
    std::vector<T> gx(x.numel());
    const T inv = T{1} / static_cast<T>(len);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t t = 0; t < len; ++t) gx[r * len + t] = g[r] * inv;
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> dropout(Trace<T>& tr, const Tensor<T>& x, double p, bool training, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError(kModule, "dropout: probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.numel());
  for (auto& m : mask) m = rng.uniform() >= p ? keep_scale : T{0};
  Tensor<T> y(x.shape());
  auto yd = y.data();
  auto xd = x.data();
  for (std::size_t i = 0; i < yd.size(); ++i) yd[i] = xd[i] * mask[i];
  return tr.record("dropout", y, {x}, [x, mask = std::move(mask)](const Tensor<T>& out) {
    auto g = out.grad();
    std::vector<T> gx(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] = g[i] * mask[i];
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> concat(Trace<T>& tr, const std::vector<Tensor<T>>& parts) {
  if (parts.empty()) throw DimensionError(kModule, "concat: no inputs");
  const Shape& first = parts.front().shape();
  const std::size_t rows = rows_of(first);
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.dim() != first.size() || rows_of(p.shape()) != rows ||
        !std::equal(first.begin(), first.end() - 1, p.shape().begin()))
      throw DimensionError(kModule, "concat: leading axes differ");
    widths.push_back(p.shape().back());
    total += widths.back();
  }
  Shape out_shape = first;
  out_shape.back() = total;
  Tensor<T> y(out_shape);
  auto yd = y.data();
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    auto pd = parts[k].data();
    for (std::size_t r = 0; r < rows; ++r)
      std::copy_n(pd.data() + r * widths[k], widths[k], yd.data() + r * total + off);
    off += widths[k];
  }
  return tr.record("concat", y, parts, [parts, widths, rows, total](const Tensor<T>& out) {
    auto g = out.grad();
    std::size_t off = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      if (parts[k].requires_grad()) {
        std::vector<T> gp(rows * widths[k]);
        for (std::size_t r = 0; r < rows; ++r)
          std::copy_n(g.data() + r * total + off, widths[k], gp.data() + r * widths[k]);
        Tensor<T>(parts[k]).accumulate_grad(gp);
      }
      off += widths[k];
    }
  });
}

template <typename T>
Tensor<T> embedding(Trace<T>& tr, const Tensor<T>& table, const std::vector<std::size_t>& indices) {
  if (table.dim() != 2) throw DimensionError(kModule, "embedding: table must be [V, D]");
  if (indices.empty()) throw DimensionError(kModule, "embedding: no indices");
  const std::size_t v = table.size(0), d = table.size(1);
  Tensor<T> y(Shape{indices.size(), d});
  auto yd = y.data();
  auto td = table.data();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= v) throw ContractError(kModule, "embedding: index out of range");
    std::copy_n(td.data() + indices[i] * d, d, yd.data() + i * d);
  }
  return tr.record("embedding", y, {table}, [table, indices, d](const Tensor<T>& out) {
    auto g = out.grad();
    std::vector<T> gt(table.numel(), T{0});
    for (std::size_t i = 0; i < indices.size(); ++i)
      for (std::size_t j = 0; j < d; ++j) gt[indices[i] * d + j] += g[i * d + j];
    Tensor<T>(table).accumulate_grad(gt);
  });
}

template <typename T>
Tensor<T> reshape(Trace<T>& tr, const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.numel())
    throw DimensionError(kModule, "reshape: " + to_string(x.shape()) + " to " + to_string(shape));
  Tensor<T> y = x.reshaped(std::move(shape));
  return tr.record("reshape", y, {x}, [x](const Tensor<T>& out) { Tensor<T>(x).accumulate_grad(out.grad()); });
}

template <typename T>
Tensor<T> permute(Trace<T>& tr, const Tensor<T>& x, const std::vector<std::size_t>& axes) {
  const std::size_t r = x.dim();
  if (axes.size() != r) throw DimensionError(kModule, "permute: axis count mismatch");
  std::vector<bool> seen(r, false);
  for (auto a : axes) {
    if (a >= r || seen[a]) throw DimensionError(kModule, "permute: invalid axes");
    seen[a] = true;
  }
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r - 1; i > 0; --i) in_strides[i - 1] = in_strides[i] * x.size(i);
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = x.size(axes[i]);
  // src[j] is the input offset of output element j.
  std::vector<std::size_t> src(x.numel());
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t j = 0; j < src.size(); ++j) {
    std::size_t off = 0;
    for (std::size_t i = 0; i < r; ++i) off += idx[i] * in_strides[axes[i]];
    src[j] = off;
    for (std::size_t i = r; i-- > 0;) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
  Tensor<T> y(out_shape);
  auto yd = y.data();
  auto xd = x.data();
  for (std::size_t j = 0; j < src.size(); ++j) yd[j] = xd[src[j]];
  return tr.record("permute", y, {x}, [x, src = std::move(src)](const Tensor<T>& out) {
    auto g = out.grad();
    std::vector<T> gx(x.numel());
    for (std::size_t j = 0; j < src.size(); ++j) gx[src[j]] = g[j];
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> sum(Trace<T>& tr, const Tensor<T>& x) {
  double s = 0.0;
  for (auto v : x.data()) s += v;
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(s));
  return tr.record("sum", y, {x}, [x](const Tensor<T>& out) {
    std::vector<T> gx(x.numel(), out.grad()[0]);
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> mean(Trace<T>& tr, const Tensor<T>& x) {
  double s = 0.0;
  for (auto v : x.data()) s += v;
  const std::size_t n = x.numel();
  Tensor<T> y = Tensor<T>::scalar(static_cast<T>(s / static_cast<double>(n)));
  return tr.record("mean", y, {x}, [x, n](const Tensor<T>& out) {
    std::vector<T> gx(n, static_cast<T>(out.grad()[0] / static_cast<T>(n)));
    Tensor<T>(x).accumulate_grad(gx);
  });
}

template <typename T>
Tensor<T> multi_head_attention(Trace<T>& tr, const Tensor<T>& x_in, std::size_t heads, const AttentionParams<T>& p) {
  if (x_in.dim() != 2 && x_in.dim() != 3) throw DimensionError(kModule, "attention: input must be [T,D] or [B,T,D]");
  if (heads == 0) throw ConfigError(kModule, "attention: heads must be positive");
  const bool unbatched = x_in.dim() == 2;
  const std::size_t b = unbatched ? 1 : x_in.size(0);
  const std::size_t t = x_in.size(unbatched ? 0 : 1);
  const std::size_t d = x_in.shape().back();
  if (d % heads != 0)
    throw ConfigError(kModule, "attention: model dim " + std::to_string(d) + " not divisible by " +
                                   std::to_string(heads) + " heads");
  const std::size_t hd = d / heads;
  const Tensor<T> x = unbatched ? reshape(tr, x_in, Shape{1, t, d}) : x_in;

  auto split = [&](const Tensor<T>& z) {
    auto r = reshape(tr, z, Shape{b, t, heads, hd});
    r = permute(tr, r, {0, 2, 1, 3});
    return reshape(tr, r, Shape{b * heads, t, hd});
  };
  const auto q = split(linear(tr, x, p.wq, p.bq));
  const auto k = split(linear(tr, x, p.wk, p.bk));
  const auto v = split(linear(tr, x, p.wv, p.bv));
  auto scores = scale(tr, matmul(tr, q, k, true), static_cast<T>(1.0 / std::sqrt(static_cast<double>(hd))));
  const auto weights = softmax(tr, scores);
  auto ctx = matmul(tr, weights, v);
  ctx = reshape(tr, ctx, Shape{b, heads, t, hd});
  ctx = permute(tr, ctx, {0, 2, 1, 3});
  ctx = reshape(tr, ctx, Shape{b, t, d});
  auto y = linear(tr, ctx, p.wo, p.bo);
  return unbatched ? reshape(tr, y, Shape{t, d}) : y;
}

#define LASAN_INSTANTIATE_OPS(T)                                                                                   \
  template Tensor<T> conv1d(Trace<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t,           \
                            std::size_t);                                                                           \
  template Tensor<T> linear(Trace<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> matmul(Trace<T>&, const Tensor<T>&, const Tensor<T>&, bool);                                  \
  template Tensor<T> add(Trace<T>&, const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> sub(Trace<T>&, const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> mul(Trace<T>&, const Tensor<T>&, const Tensor<T>&);                                           \
  template Tensor<T> scale(Trace<T>&, const Tensor<T>&, T);                                                        \
  template Tensor<T> relu(Trace<T>&, const Tensor<T>&);                                                            \
  template Tensor<T> sigmoid(Trace<T>&, const Tensor<T>&);                                                         \
  template Tensor<T> softmax(Trace<T>&, const Tensor<T>&);                                                         \
  template Tensor<T> layer_norm(Trace<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T);               \
  template Tensor<T> batch_norm(Trace<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, Tensor<T>&,       \
                                Tensor<T>&, const BatchNormOptions&);                                               \
  template Tensor<T> maxpool1d(Trace<T>&, const Tensor<T>&);                                                       \
  template Tensor<T> global_avg_pool(Trace<T>&, const Tensor<T>&);                                                 \
  template Tensor<T> dropout(Trace<T>&, const Tensor<T>&, double, bool, Rng&);                                     \
  template Tensor<T> concat(Trace<T>&, const std::vector<Tensor<T>>&);                                             \
  template Tensor<T> embedding(Trace<T>&, const Tensor<T>&, const std::vector<std::size_t>&);                      \
  template Tensor<T> reshape(Trace<T>&, const Tensor<T>&, Shape);                                                  \
  template Tensor<T> permute(Trace<T>&, const Tensor<T>&, const std::vector<std::size_t>&);                        \
  template Tensor<T> sum(Trace<T>&, const Tensor<T>&);                                                             \
  template Tensor<T> mean(Trace<T>&, const Tensor<T>&);                                                            \
  template Tensor<T> multi_head_attention(Trace<T>&, const Tensor<T>&, std::size_t, const AttentionParams<T>&);

LASAN_INSTANTIATE_OPS(float)
LASAN_INSTANTIATE_OPS(double)

}  // namespace lasan::num
