#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "priornet/tensor.hpp"

// Differentiable building blocks of the encoder-decoder. Each forward has a
// matching backward that accumulates parameter gradients into the supplied
// spans and returns the gradient with respect to the input.
namespace priornet::layers {

// Convolution with an odd cubic kernel (ksize along every real axis, 1 along
// the depth of a 2D grid), zero "same" padding and stride 1.
// weight layout: [out][in][kh][kw][kd]; bias may be empty.
template <typename T>
Tensor<T> conv_forward(const Tensor<T>& x, std::span<const T> weight, std::span<const T> bias, int out_channels,
                       int ksize);

template <typename T>
Tensor<T> conv_backward(const Tensor<T>& x, std::span<const T> weight, const Tensor<T>& dy, int ksize,
                        std::span<T> dweight, std::span<T> dbias, bool need_dx);

std::size_t conv_weight_count(int in_channels, int out_channels, int ksize, int ndim);

template <typename T>
struct NormCache {
  Tensor<T> normalized;  // (x - mean) / sqrt(var + eps), before the affine map
  std::vector<T> inv_std;
};

// Per-channel instance normalization with a learned scale and shift.
template <typename T>
Tensor<T> instance_norm_forward(const Tensor<T>& x, std::span<const T> scale, std::span<const T> shift, double eps,
                                NormCache<T>& cache);

template <typename T>
Tensor<T> instance_norm_backward(const Tensor<T>& dy, std::span<const T> scale, const NormCache<T>& cache,
                                 std::span<T> dscale, std::span<T> dshift);

template <typename T>
void relu_inplace(Tensor<T>& x);

// dy masked by (y > 0), where y is the ReLU output.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& y, const Tensor<T>& dy);

// 2x max pooling over the real axes. `argmax` receives, per output element,
// the flat input index it was taken from.
template <typename T>
Tensor<T> max_pool_forward(const Tensor<T>& x, std::vector<std::uint32_t>& argmax);

template <typename T>
Tensor<T> max_pool_backward(const Extent& input_extent, const std::vector<std::uint32_t>& argmax,
                            const Tensor<T>& dy);

// Nearest-neighbour 2x upsampling over the real axes.
template <typename T>
Tensor<T> upsample_forward(const Tensor<T>& x);

template <typename T>
Tensor<T> upsample_backward(const Tensor<T>& dy);

}  // namespace priornet::layers
