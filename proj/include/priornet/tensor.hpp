#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "priornet/errors.hpp"

namespace priornet {

// Spatial extent of a 2D (H, W) or 3D (H, W, D) grid. 2D grids are stored
// with d == 1 so that every kernel can iterate three axes.
struct Extent {
  int h = 1;
  int w = 1;
  int d = 1;
  int ndim = 3;

  static Extent from_dims(const std::vector<int>& dims);
  static Extent cube(int n, int ndim = 3);

  std::vector<int> dims() const;
  std::size_t voxels() const { return std::size_t(h) * std::size_t(w) * std::size_t(d); }
  std::size_t index(int i, int j, int k) const {
    return (std::size_t(i) * std::size_t(w) + std::size_t(j)) * std::size_t(d) + std::size_t(k);
  }
  // Halves every real axis (the depth of a 2D grid stays 1).
  Extent halved() const;
  Extent doubled() const;
  bool divisible_by(int factor) const;
  std::string str() const;

  bool operator==(const Extent&) const = default;
};

// Channel-first dense grid: element (c, i, j, k) lives at
// c * voxels + extent.index(i, j, k).
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  Tensor(int channels, const Extent& extent, T fill = T(0))
      : channels_(channels), extent_(extent), data_(std::size_t(channels) * extent.voxels(), fill) {}

  int channels() const { return channels_; }
  const Extent& extent() const { return extent_; }
  std::size_t voxels() const { return extent_.voxels(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T* channel(int c) { return data_.data() + std::size_t(c) * voxels(); }
  const T* channel(int c) const { return data_.data() + std::size_t(c) * voxels(); }
  std::span<T> channel_span(int c) { return {channel(c), voxels()}; }
  std::span<const T> channel_span(int c) const { return {channel(c), voxels()}; }

  T& at(int c, std::size_t voxel) { return data_[std::size_t(c) * voxels() + voxel]; }
  const T& at(int c, std::size_t voxel) const { return data_[std::size_t(c) * voxels() + voxel]; }

  // Spatial-then-channel accessor, i.e. the (H, W, D, C) view.
  T& operator()(int i, int j, int k, int c) { return at(c, extent_.index(i, j, k)); }
  const T& operator()(int i, int j, int k, int c) const { return at(c, extent_.index(i, j, k)); }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_shape(const Tensor& other) const {
    return channels_ == other.channels_ && extent_ == other.extent_;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(channels_, extent_);
    for (std::size_t n = 0; n < data_.size(); ++n) out.data()[n] = static_cast<U>(data_[n]);
    return out;
  }

  bool operator==(const Tensor&) const = default;

 private:
  int channels_ = 0;
  Extent extent_{};
  std::vector<T> data_;
};

using FeatureMap = Tensor<double>;

// A one-channel tensor of per-voxel weights.
template <typename T>
using AttentionField = Tensor<T>;

std::string shape_string(int channels, const Extent& extent);

template <typename T>
bool all_finite(const Tensor<T>& t);

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

// Splits the channel axis at `first_channels`.
template <typename T>
void split_channels(const Tensor<T>& joined, int first_channels, Tensor<T>& a, Tensor<T>& b);

}  // namespace priornet
