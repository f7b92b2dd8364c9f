#include "priornet/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace priornet::layers {

namespace {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

struct KernelGeometry {
  int kh, kw, kd;
  int volume() const { return kh * kw * kd; }
};

KernelGeometry kernel_geometry(int ksize, int ndim) {
  if (ksize < 1 || ksize % 2 == 0) throw ShapeError("convolution kernel size must be odd");
  return {ksize, ksize, ndim == 3 ? ksize : 1};
}

// Unfolds x into a (in_channels * kernel volume) x voxels matrix.
template <typename T>
void im2col(const Tensor<T>& x, const KernelGeometry& g, std::vector<T>& col) {
  const Extent& e = x.extent();
  const std::size_t n = e.voxels();
  col.assign(std::size_t(x.channels()) * std::size_t(g.volume()) * n, T(0));
  std::size_t row = 0;
  for (int ci = 0; ci < x.channels(); ++ci) {
    const T* src = x.channel(ci);
    for (int a = 0; a < g.kh; ++a)
      for (int b = 0; b < g.kw; ++b)
        for (int c = 0; c < g.kd; ++c, ++row) {
          const int oi = a - g.kh / 2, oj = b - g.kw / 2, ok = c - g.kd / 2;
          T* dst = col.data() + row * n;
          const int k_lo = std::max(0, -ok), k_hi = std::min(e.d, e.d - ok);
          for (int i = 0; i < e.h; ++i) {
            const int si = i + oi;
            if (si < 0 || si >= e.h) continue;
            for (int j = 0; j < e.w; ++j) {
              const int sj = j + oj;
              if (sj < 0 || sj >= e.w) continue;
              const T* s = src + e.index(si, sj, 0);
              T* dd = dst + e.index(i, j, 0);
              for (int k = k_lo; k < k_hi; ++k) dd[k] = s[k + ok];
            }
          }
        }
  }
}

// Adjoint of im2col: folds the column matrix back into dx.
template <typename T>
void col2im(const std::vector<T>& col, const KernelGeometry& g, Tensor<T>& dx) {
  const Extent& e = dx.extent();
  const std::size_t n = e.voxels();
  std::size_t row = 0;
  for (int ci = 0; ci < dx.channels(); ++ci) {
    T* dst = dx.channel(ci);
    for (int a = 0; a < g.kh; ++a)
      for (int b = 0; b < g.kw; ++b)
        for (int c = 0; c < g.kd; ++c, ++row) {
          const int oi = a - g.kh / 2, oj = b - g.kw / 2, ok = c - g.kd / 2;
          const T* src = col.data() + row * n;
          const int k_lo = std::max(0, -ok), k_hi = std::min(e.d, e.d - ok);
          for (int i = 0; i < e.h; ++i) {
            const int si = i + oi;
            if (si < 0 || si >= e.h) continue;
            for (int j = 0; j < e.w; ++j) {
              const int sj = j + oj;
              if (sj < 0 || sj >= e.w) continue;
              T* d = dst + e.index(si, sj, 0);
              const T* s = src + e.index(i, j, 0);
              for (int k = k_lo; k < k_hi; ++k) d[k + ok] += s[k];
            }
          }
        }
  }
}

}  // namespace

std::size_t conv_weight_count(int in_channels, int out_channels, int ksize, int ndim) {
  return std::size_t(in_channels) * std::size_t(out_channels) * std::size_t(kernel_geometry(ksize, ndim).volume());
}

template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias, int out_channels,
                       int ksize) {
  const KernelGeometry g = kernel_geometry(ksize, x.extent().ndim);
  const std::size_t rows = std::size_t(x.channels()) * std::size_t(g.volume());
  const auto n = Eigen::Index(x.voxels());
  if (weight.size() != rows * std::size_t(out_channels))
    throw ShapeError("conv: weight has " + std::to_string(weight.size()) + " entries, expected " +
                     std::to_string(rows * std::size_t(out_channels)));
  if (!bias.empty() && bias.size() != std::size_t(out_channels)) throw ShapeError("conv: bias size mismatch");

  Tensor<T> y(out_channels, x.extent());
  ConstMatrixMap<T> w(weight.data(), out_channels, Eigen::Index(rows));
  MatrixMap<T> out(y.data().data(), out_channels, n);
  if (ksize == 1) {
    out.noalias() = w * ConstMatrixMap<T>(x.data().data(), x.channels(), n);
  } else {
    std::vector<T> col;
    im2col(x, g, col);
    out.noalias() = w * ConstMatrixMap<T>(col.data(), Eigen::Index(rows), n);
  }
  if (!bias.empty())
    for (int c = 0; c < out_channels; ++c) out.row(c).array() += bias[std::size_t(c)];
  return y;
}

template <typename T>
Tensor<T> conv_backward(const Tensor<T>& x, std::span<const T> weight, const Tensor<T>& dy, int ksize,
                        std::span<T> dweight, std::span<T> dbias, bool need_dx) {
  const KernelGeometry g = kernel_geometry(ksize, x.extent().ndim);
  const auto rows = Eigen::Index(std::size_t(x.channels()) * std::size_t(g.volume()));
  const auto n = Eigen::Index(x.voxels());
  const int out_channels = dy.channels();
  if (dweight.size() != weight.size()) throw ShapeError("conv backward: gradient buffer size mismatch");

  ConstMatrixMap<T> w(weight.data(), out_channels, rows);
  ConstMatrixMap<T> g_out(dy.data().data(), out_channels, n);
  MatrixMap<T> gw(dweight.data(), out_channels, rows);
  // Plain loop: Eigen's vectorised sum peels up to the first aligned address,
  // so its rounding would depend on where the buffer happened to land.
  if (!dbias.empty())
    for (int c = 0; c < out_channels; ++c) {
      T s = 0;
      for (const T v : dy.channel_span(c)) s += v;
      dbias[std::size_t(c)] += s;
    }

  if (ksize == 1) {
    ConstMatrixMap<T> xin(x.data().data(), x.channels(), n);
    gw.noalias() += g_out * xin.transpose();
    if (!need_dx) return {};
    Tensor<T> dx(x.channels(), x.extent());
    MatrixMap<T>(dx.data().data(), x.channels(), n).noalias() = w.transpose() * g_out;
    return dx;
  }

  std::vector<T> col;
  im2col(x, g, col);
  gw.noalias() += g_out * ConstMatrixMap<T>(col.data(), rows, n).transpose();
  if (!need_dx) return {};
  MatrixMap<T>(col.data(), rows, n).noalias() = w.transpose() * g_out;
  Tensor<T> dx(x.channels(), x.extent());
  col2im(col, g, dx);
  return dx;
}

template <typename T>
Tensor<T> instance_norm_forward(const Tensor<T>& x, std::span<const T> scale, std::span<const T> shift, double eps,
                                NormCache<T>& cache) {
  const int channels = x.channels();
  if (scale.size() != std::size_t(channels) || shift.size() != std::size_t(channels))
    throw ShapeError("instance norm: parameter size mismatch");
  const std::size_t n = x.voxels();
  cache.normalized = Tensor<T>(channels, x.extent());
  cache.inv_std.assign(std::size_t(channels), T(0));
  Tensor<T> y(channels, x.extent());
  for (int c = 0; c < channels; ++c) {
    const T* src = x.channel(c);
    double mean = 0.0;
    for (std::size_t v = 0; v < n; ++v) mean += src[v];
    mean /= double(n);
    double var = 0.0;
    for (std::size_t v = 0; v < n; ++v) var += (src[v] - mean) * (src[v] - mean);
    var /= double(n);
    const double inv = 1.0 / std::sqrt(var + eps);
    cache.inv_std[std::size_t(c)] = T(inv);
    T* xn = cache.normalized.channel(c);
    T* dst = y.channel(c);
    const T s = scale[std::size_t(c)], b = shift[std::size_t(c)];
    for (std::size_t v = 0; v < n; ++v) {
      xn[v] = T((src[v] - mean) * inv);
      dst[v] = s * xn[v] + b;
    }
  }
  return y;
}

template <typename T>
Tensor<T> instance_norm_backward(const Tensor<T>& dy, std::span<const T> scale, const NormCache<T>& cache,
                                 std::span<T> dscale, std::span<T> dshift) {
  const int channels = dy.channels();
  const std::size_t n = dy.voxels();
  Tensor<T> dx(channels, dy.extent());
  for (int c = 0; c < channels; ++c) {
    const T* g = dy.channel(c);
    const T* xn = cache.normalized.channel(c);
    double sum_g = 0.0, sum_gx = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
      sum_g += g[v];
      sum_gx += double(g[v]) * xn[v];
    }
    dscale[std::size_t(c)] += T(sum_gx);
    dshift[std::size_t(c)] += T(sum_g);
    const double k = double(scale[std::size_t(c)]) * cache.inv_std[std::size_t(c)];
    const double mean_g = sum_g / double(n), mean_gx = sum_gx / double(n);
    T* d = dx.channel(c);
    for (std::size_t v = 0; v < n; ++v) d[v] = T(k * (g[v] - mean_g - xn[v] * mean_gx));
  }
  return dx;
}

template <typename T>
void relu_inplace(Tensor<T>& x) {
  for (T& v : x.data()) v = v > T(0) ? v : T(0);
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy) {
  Tensor<T> dx(dy.channels(), dy.extent());
  for (std::size_t n = 0; n < dx.size(); ++n) dx.data()[n] = y.data()[n] > T(0) ? dy.data()[n] : T(0);
  return dx;
}

template <typename T>
Tensor<T> max_pool_forward(const Tensor<T>& x, std::vector<std::uint32_t>& argmax) {
  const Extent& in = x.extent();
  if (!in.divisible_by(2)) throw ShapeError("max pool: extent " + in.str() + " is not divisible by 2");
  const Extent out = in.halved();
  const int pd = in.ndim == 3 ? 2 : 1;
  Tensor<T> y(x.channels(), out);
  argmax.assign(y.size(), 0);
  std::size_t o = 0;
  for (int c = 0; c < x.channels(); ++c) {
    const T* src = x.channel(c);
    const std::size_t base = std::size_t(c) * in.voxels();
    for (int i = 0; i < out.h; ++i)
      for (int j = 0; j < out.w; ++j)
        for (int k = 0; k < out.d; ++k, ++o) {
          std::size_t best = in.index(2 * i, 2 * j, pd * k);
          for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
              for (int cc = 0; cc < pd; ++cc) {
                const std::size_t idx = in.index(2 * i + a, 2 * j + b, pd * k + cc);
                if (src[idx] > src[best]) best = idx;
              }
          y.data()[o] = src[best];
          argmax[o] = std::uint32_t(base + best);
        }
  }
  return y;
}

template <typename T>
Tensor<T> max_pool_backward(const Extent& input_extent, const std::vector<std::uint32_t>& argmax,
                            const Tensor<T>& dy) {
  Tensor<T> dx(dy.channels(), input_extent);
  for (std::size_t o = 0; o < dy.size(); ++o) dx.data()[argmax[o]] += dy.data()[o];
  return dx;
}

template <typename T>
Tensor<T> upsample_forward(const Tensor<T>& x) {
  const Extent& in = x.extent();
  const Extent out = in.doubled();
  const int pd = in.ndim == 3 ? 2 : 1;
  Tensor<T> y(x.channels(), out);
  for (int c = 0; c < x.channels(); ++c) {
    const T* src = x.channel(c);
    T* dst = y.channel(c);
    for (int i = 0; i < out.h; ++i)
      for (int j = 0; j < out.w; ++j)
        for (int k = 0; k < out.d; ++k) dst[out.index(i, j, k)] = src[in.index(i / 2, j / 2, k / pd)];
  }
  return y;
}

template <typename T>
Tensor<T> upsample_backward(const Tensor<T>& dy) {
  const Extent& out = dy.extent();
  const Extent in = out.halved();
  const int pd = out.ndim == 3 ? 2 : 1;
  Tensor<T> dx(dy.channels(), in);
  for (int c = 0; c < dy.channels(); ++c) {
    const T* src = dy.channel(c);
    T* dst = dx.channel(c);
    for (int i = 0; i < out.h; ++i)
      for (int j = 0; j < out.w; ++j)
        for (int k = 0; k < out.d; ++k) dst[in.index(i / 2, j / 2, k / pd)] += src[out.index(i, j, k)];
  }
  return dx;
}

#define PRIORNET_INSTANTIATE_LAYERS(T)                                                                          \
  template Tensor<T> conv_forward(const Tensor<T>&, std::span<const T>, std::span<const T>, int, int);         \
  template Tensor<T> conv_backward(const Tensor<T>&, std::span<const T>, const Tensor<T>&, int, std::span<T>, \
                                   std::span<T>, bool);                                                       \
  template Tensor<T> instance_norm_forward(const Tensor<T>&, std::span<const T>, std::span<const T>, double,   \
                                           NormCache<T>&);                                                    \
  template Tensor<T> instance_norm_backward(const Tensor<T>&, std::span<const T>, const NormCache<T>&,         \
                                            std::span<T>, std::span<T>);                                      \
  template void relu_inplace(Tensor<T>&);                                                                     \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                                       \
  template Tensor<T> max_pool_forward(const Tensor<T>&, std::vector<std::uint32_t>&);                          \
  template Tensor<T> max_pool_backward(const Extent&, const std::vector<std::uint32_t>&, const Tensor<T>&);    \
  template Tensor<T> upsample_forward(const Tensor<T>&);                                                      \
  template Tensor<T> upsample_backward(const Tensor<T>&);

PRIORNET_INSTANTIATE_LAYERS(float)
PRIORNET_INSTANTIATE_LAYERS(double)

}  // namespace priornet::layers
