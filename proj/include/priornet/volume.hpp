#pragma once

#include <cstdint>
#include <vector>

#include "priornet/tensor.hpp"

namespace priornet {

// Dense scalar intensity grid in C order (last axis fastest).
struct Volume {
  Extent extent{};
  std::vector<double> spacing;  // mm per axis, informational
  std::vector<float> data;

  Volume() = default;
  explicit Volume(const Extent& e, float fill = 0.0f);
  Volume(const Extent& e, std::vector<float> values);

  std::size_t voxels() const { return extent.voxels(); }
  float& operator()(int i, int j, int k = 0) { return data[extent.index(i, j, k)]; }
  float operator()(int i, int j, int k = 0) const { return data[extent.index(i, j, k)]; }

  // Throws ShapeError / RangeError when the invariants (finite values,
  // data size matching the extent) do not hold.
  void validate() const;

  bool operator==(const Volume&) const = default;
};

// Integer class grid; 0 is background and 1..num_classes are foreground.
struct LabelMap {
  Extent extent{};
  int num_classes = 1;
  std::vector<double> spacing;
  std::vector<std::int32_t> data;

  LabelMap() = default;
  LabelMap(const Extent& e, int k, std::int32_t fill = 0);
  LabelMap(const Extent& e, int k, std::vector<std::int32_t> values);

  std::size_t voxels() const { return extent.voxels(); }
  std::int32_t& operator()(int i, int j, int k = 0) { return data[extent.index(i, j, k)]; }
  std::int32_t operator()(int i, int j, int k = 0) const { return data[extent.index(i, j, k)]; }

  std::int32_t max_label() const;
  void validate() const;

  bool operator==(const LabelMap&) const = default;
};

// Template image with its per-class foreground images and labels; this is
// the input of the template branch.
struct TemplateBundle {
  Volume image;
  std::vector<Volume> foreground;  // foreground[c] holds class c + 1
  LabelMap labels;

  int num_classes() const { return int(foreground.size()); }
};

Volume truncate_intensity(const Volume& v, double lo, double hi);

// Population z-score. Throws DegenerateInputError on constant input.
Volume normalize_zscore(const Volume& v);

// Per-axis start offsets used by center_crop: floor((in - out) / 2).
std::vector<int> crop_offsets(const Extent& in, const std::vector<int>& out);
Volume center_crop(const Volume& v, const std::vector<int>& dims);
LabelMap center_crop(const LabelMap& labels, const std::vector<int>& dims);

TemplateBundle extract_foreground_regions(const Volume& img, const LabelMap& labels);

// K + 1 indicator channels, channel c marks voxels of class c.
template <typename T = double>
Tensor<T> one_hot_encode(const LabelMap& labels);

template <typename T>
Tensor<T> volume_tensor(const Volume& v);

// [template, foreground_1 .. foreground_K] as K + 1 channels.
template <typename T>
Tensor<T> template_tensor(const TemplateBundle& bundle);

// Axial slice (along the last axis) of a 3D grid as a 2D grid.
Volume axial_slice(const Volume& v, int k);
LabelMap axial_slice(const LabelMap& labels, int k);

}  // namespace priornet
