#include "priornet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace priornet {

Extent Extent::from_dims(const std::vector<int>& dims) {
  if (dims.size() != 2 && dims.size() != 3)
    throw ShapeError("grid must be 2D or 3D, got " + std::to_string(dims.size()) + " dims");
  for (int v : dims)
    if (v < 1) throw ShapeError("grid dimensions must be >= 1");
  Extent e;
  e.h = dims[0];
  e.w = dims[1];
  e.d = dims.size() == 3 ? dims[2] : 1;
  e.ndim = int(dims.size());
  return e;
}

Extent Extent::cube(int n, int ndim) {
  return ndim == 2 ? from_dims({n, n}) : from_dims({n, n, n});
}

std::vector<int> Extent::dims() const {
  if (ndim == 2) return {h, w};
  return {h, w, d};
}

Extent Extent::halved() const {
  Extent e = *this;
  e.h /= 2;
  e.w /= 2;
  if (ndim == 3) e.d /= 2;
  return e;
}

Extent Extent::doubled() const {
  Extent e = *this;
  e.h *= 2;
  e.w *= 2;
  if (ndim == 3) e.d *= 2;
  return e;
}

bool Extent::divisible_by(int factor) const {
  bool ok = h % factor == 0 && w % factor == 0;
  if (ndim == 3) ok = ok && d % factor == 0;
  return ok;
}

std::string Extent::str() const {
  std::ostringstream os;
  os << h << "x" << w;
  if (ndim == 3) os << "x" << d;
  return os.str();
}

std::string shape_string(int channels, const Extent& extent) {
  return extent.str() + "x" + std::to_string(channels);
}

template <typename T>
bool all_finite(const Tensor<T>& t) {
  return std::all_of(t.data().begin(), t.data().end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (!(a.extent() == b.extent()))
    throw ShapeError("concat: spatial extents differ (" + a.extent().str() + " vs " + b.extent().str() + ")");
  Tensor<T> out(a.channels() + b.channels(), a.extent());
  std::copy(a.data().begin(), a.data().end(), out.data().begin());
  std::copy(b.data().begin(), b.data().end(), out.data().begin() + std::ptrdiff_t(a.size()));
  return out;
}

template <typename T>
void split_channels(const Tensor<T>& joined, int first_channels, Tensor<T>& a, Tensor<T>& b) {
  if (first_channels < 0 || first_channels > joined.channels())
    throw ShapeError("split: channel index out of range");
  a = Tensor<T>(first_channels, joined.extent());
  b = Tensor<T>(joined.channels() - first_channels, joined.extent());
  auto mid = joined.data().begin() + std::ptrdiff_t(a.size());
  std::copy(joined.data().begin(), mid, a.data().begin());
  std::copy(mid, joined.data().end(), b.data().begin());
}

template bool all_finite(const Tensor<float>&);
template bool all_finite(const Tensor<double>&);
template Tensor<float> concat_channels(const Tensor<float>&, const Tensor<float>&);
template Tensor<double> concat_channels(const Tensor<double>&, const Tensor<double>&);
template void split_channels(const Tensor<float>&, int, Tensor<float>&, Tensor<float>&);
template void split_channels(const Tensor<double>&, int, Tensor<double>&, Tensor<double>&);

}  // namespace priornet
