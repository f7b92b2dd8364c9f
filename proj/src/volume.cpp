#include "priornet/volume.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace priornet {

namespace {

std::vector<double> unit_spacing(const Extent& e) { return std::vector<double>(std::size_t(e.ndim), 1.0); }

void require_same_extent(const Extent& a, const Extent& b, const char* what) {
  if (!(a == b)) throw ShapeError(std::string(what) + ": shape mismatch (" + a.str() + " vs " + b.str() + ")");
}

template <typename Grid, typename Value>
Grid crop_grid(const Grid& g, const std::vector<int>& dims) {
  const auto off = crop_offsets(g.extent, dims);
  const Extent out = Extent::from_dims(dims);
  Grid result = g;
  result.extent = out;
  result.data.assign(out.voxels(), Value{});
  const int ok = out.ndim == 3 ? off[2] : 0;
  for (int i = 0; i < out.h; ++i)
    for (int j = 0; j < out.w; ++j)
      for (int k = 0; k < out.d; ++k)
        result.data[out.index(i, j, k)] = g.data[g.extent.index(i + off[0], j + off[1], k + ok)];
  return result;
}

}  // namespace

Volume::Volume(const Extent& e, float fill) : extent(e), spacing(unit_spacing(e)), data(e.voxels(), fill) {}

Volume::Volume(const Extent& e, std::vector<float> values)
    : extent(e), spacing(unit_spacing(e)), data(std::move(values)) {
  if (data.size() != e.voxels()) throw ShapeError("volume data size does not match shape " + e.str());
}

void Volume::validate() const {
  if (data.size() != extent.voxels()) throw ShapeError("volume data size does not match shape " + extent.str());
  if (spacing.size() != std::size_t(extent.ndim)) throw ShapeError("volume spacing must have one entry per axis");
  for (float v : data)
    if (!std::isfinite(v)) throw RangeError("volume contains a non-finite value");
}

LabelMap::LabelMap(const Extent& e, int k, std::int32_t fill)
    : extent(e), num_classes(k), spacing(unit_spacing(e)), data(e.voxels(), fill) {}

LabelMap::LabelMap(const Extent& e, int k, std::vector<std::int32_t> values)
    : extent(e), num_classes(k), spacing(unit_spacing(e)), data(std::move(values)) {
  if (data.size() != e.voxels()) throw ShapeError("labelmap data size does not match shape " + e.str());
}

std::int32_t LabelMap::max_label() const {
  return data.empty() ? 0 : *std::max_element(data.begin(), data.end());
}

void LabelMap::validate() const {
  if (num_classes < 1) throw LabelError("labelmap needs at least one foreground class");
  if (data.size() != extent.voxels()) throw ShapeError("labelmap data size does not match shape " + extent.str());
  for (std::int32_t v : data)
    if (v < 0 || v > num_classes)
      throw LabelError("label " + std::to_string(v) + " outside {0.." + std::to_string(num_classes) + "}");
}

Volume truncate_intensity(const Volume& v, double lo, double hi) {
  if (!(lo < hi)) throw RangeError("truncate_intensity: lower bound must be below upper bound");
  Volume out = v;
  const float flo = float(lo), fhi = float(hi);
  for (float& x : out.data) x = std::clamp(x, flo, fhi);
  return out;
}

Volume normalize_zscore(const Volume& v) {
  if (v.data.size() < 2) throw DegenerateInputError("normalize_zscore: need at least two voxels");
  const double n = double(v.data.size());
  double mean = 0.0;
  for (float x : v.data) mean += x;
  mean /= n;
  double var = 0.0;
  for (float x : v.data) var += (x - mean) * (x - mean);
  var /= n;
  if (!(var > 0.0)) throw DegenerateInputError("normalize_zscore: constant volume has zero variance");
  const double inv_std = 1.0 / std::sqrt(var);
  Volume out = v;
  for (float& x : out.data) x = float((x - mean) * inv_std);
  return out;
}

std::vector<int> crop_offsets(const Extent& in, const std::vector<int>& out) {
  const auto in_dims = in.dims();
  if (out.size() != in_dims.size())
    throw ShapeError("center_crop: expected " + std::to_string(in_dims.size()) + " extents");
  std::vector<int> off(out.size());
  for (std::size_t a = 0; a < out.size(); ++a) {
    if (out[a] < 1 || out[a] > in_dims[a])
      throw RangeError("center_crop: extent " + std::to_string(out[a]) + " does not fit axis of size " +
                       std::to_string(in_dims[a]));
    off[a] = (in_dims[a] - out[a]) / 2;
  }
  return off;
}

Volume center_crop(const Volume& v, const std::vector<int>& dims) { return crop_grid<Volume, float>(v, dims); }

LabelMap center_crop(const LabelMap& labels, const std::vector<int>& dims) {
  return crop_grid<LabelMap, std::int32_t>(labels, dims);
}

TemplateBundle extract_foreground_regions(const Volume& img, const LabelMap& labels) {
  require_same_extent(img.extent, labels.extent, "extract_foreground_regions");
  if (labels.num_classes < 1) throw LabelError("extract_foreground_regions: labelmap has no foreground classes");
  labels.validate();
  TemplateBundle bundle;
  bundle.image = img;
  bundle.labels = labels;
  bundle.foreground.reserve(std::size_t(labels.num_classes));
  for (int c = 1; c <= labels.num_classes; ++c) {
    Volume channel = img;
    for (std::size_t n = 0; n < channel.data.size(); ++n)
      if (labels.data[n] != c) channel.data[n] = 0.0f;
    bundle.foreground.push_back(std::move(channel));
  }
  return bundle;
}

template <typename T>
Tensor<T> one_hot_encode(const LabelMap& labels) {
  labels.validate();
  Tensor<T> out(labels.num_classes + 1, labels.extent);
  for (std::size_t n = 0; n < labels.data.size(); ++n) out.at(labels.data[n], n) = T(1);
  return out;
}

template <typename T>
Tensor<T> volume_tensor(const Volume& v) {
  Tensor<T> out(1, v.extent);
  std::copy(v.data.begin(), v.data.end(), out.data().begin());
  return out;
}

template <typename T>
Tensor<T> template_tensor(const TemplateBundle& bundle) {
  const int k = bundle.num_classes();
  Tensor<T> out(k + 1, bundle.image.extent);
  std::copy(bundle.image.data.begin(), bundle.image.data.end(), out.channel(0));
  for (int c = 0; c < k; ++c) {
    require_same_extent(bundle.image.extent, bundle.foreground[std::size_t(c)].extent, "template_tensor");
    const auto& fg = bundle.foreground[std::size_t(c)].data;
    std::copy(fg.begin(), fg.end(), out.channel(c + 1));
  }
  return out;
}

Volume axial_slice(const Volume& v, int k) {
  if (v.extent.ndim != 3) throw ShapeError("axial_slice: volume is not 3D");
  if (k < 0 || k >= v.extent.d) throw RangeError("axial_slice: index out of range");
  Volume out(Extent::from_dims({v.extent.h, v.extent.w}));
  out.spacing = {v.spacing[0], v.spacing[1]};
  for (int i = 0; i < v.extent.h; ++i)
    for (int j = 0; j < v.extent.w; ++j) out(i, j) = v(i, j, k);
  return out;
}

LabelMap axial_slice(const LabelMap& labels, int k) {
  if (labels.extent.ndim != 3) throw ShapeError("axial_slice: labelmap is not 3D");
  if (k < 0 || k >= labels.extent.d) throw RangeError("axial_slice: index out of range");
  LabelMap out(Extent::from_dims({labels.extent.h, labels.extent.w}), labels.num_classes);
  out.spacing = {labels.spacing[0], labels.spacing[1]};
  for (int i = 0; i < labels.extent.h; ++i)
    for (int j = 0; j < labels.extent.w; ++j) out(i, j) = labels(i, j, k);
  return out;
}

template Tensor<float> one_hot_encode<float>(const LabelMap&);
template Tensor<double> one_hot_encode<double>(const LabelMap&);
template Tensor<float> volume_tensor<float>(const Volume&);
template Tensor<double> volume_tensor<double>(const Volume&);
template Tensor<float> template_tensor<float>(const TemplateBundle&);
template Tensor<double> template_tensor<double>(const TemplateBundle&);

}  // namespace priornet
