#include "priornet/csam.hpp"

#include <cmath>

namespace priornet {

namespace {

template <typename T>
void require_feature_pair(const Tensor<T>& f1, const Tensor<T>& f2) {
  if (!f1.same_shape(f2))
    throw ShapeError("csam: feature maps differ in shape (" + shape_string(f1.channels(), f1.extent()) + " vs " +
                     shape_string(f2.channels(), f2.extent()) + ")");
}

template <typename T>
void require_field_for(const Tensor<T>& f, const AttentionField<T>& w) {
  if (w.channels() != 1 || !(w.extent() == f.extent()))
    throw ShapeError("csam: attention field " + shape_string(w.channels(), w.extent()) +
                     " does not match features " + shape_string(f.channels(), f.extent()));
}

}  // namespace

std::string to_string(Gating g) {
  switch (g) {
    case Gating::raw: return "raw";
    case Gating::rescaled: return "rescaled";
    case Gating::residual: return "residual";
  }
  return "raw";
}

Gating parse_gating(const std::string& s) {
  if (s == "raw") return Gating::raw;
  if (s == "rescaled") return Gating::rescaled;
  if (s == "residual") return Gating::residual;
  throw ConfigError("unknown CSAM gating '" + s + "' (expected raw, rescaled or residual)");
}

template <typename T>
AttentionField<T> csam_weights(const Tensor<T>& f1, const Tensor<T>& f2) {
  require_feature_pair(f1, f2);
  AttentionField<T> w(1, f1.extent());
  const std::size_t n = f1.voxels();
  for (std::size_t v = 0; v < n; ++v) {
    double dot = 0.0, n1 = 0.0, n2 = 0.0;
    for (int c = 0; c < f1.channels(); ++c) {
      const double a = f1.at(c, v), b = f2.at(c, v);
      dot += a * b;
      n1 += a * a;
      n2 += b * b;
    }
    n1 = std::sqrt(n1);
    n2 = std::sqrt(n2);
    if (n1 < kCsamNormFloor || n2 < kCsamNormFloor) continue;
    double cosine = dot / (n1 * n2);
    // Rounding can push |cosine| a hair past 1 for parallel vectors.
    cosine = std::fmax(-1.0, std::fmin(1.0, cosine));
    w.at(0, v) = T(cosine);
  }
  return w;
}

template <typename T>
Tensor<T> csam_apply(const Tensor<T>& f1, const AttentionField<T>& w) {
  require_field_for(f1, w);
  Tensor<T> out(f1.channels(), f1.extent());
  const std::size_t n = f1.voxels();
  for (int c = 0; c < f1.channels(); ++c) {
    const T* src = f1.channel(c);
    T* dst = out.channel(c);
    for (std::size_t v = 0; v < n; ++v) dst[v] = src[v] * w.at(0, v);
  }
  return out;
}

template <typename T>
AttentionField<T> csam_gate(const AttentionField<T>& w, Gating mode) {
  if (mode == Gating::raw) return w;
  AttentionField<T> g = w;
  for (T& v : g.data()) v = mode == Gating::rescaled ? T(0.5) * (T(1) + v) : T(1) + v;
  return g;
}

template <typename T>
void csam_weights_backward(const Tensor<T>& f1, const Tensor<T>& f2, const AttentionField<T>& w,
                           const AttentionField<T>& dw, Tensor<T>& df1, Tensor<T>& df2) {
  require_feature_pair(f1, f2);
  const std::size_t n = f1.voxels();
  for (std::size_t v = 0; v < n; ++v) {
    const double g = dw.at(0, v);
    if (g == 0.0) continue;
    double n1 = 0.0, n2 = 0.0;
    for (int c = 0; c < f1.channels(); ++c) {
      n1 += double(f1.at(c, v)) * f1.at(c, v);
      n2 += double(f2.at(c, v)) * f2.at(c, v);
    }
    n1 = std::sqrt(n1);
    n2 = std::sqrt(n2);
    if (n1 < kCsamNormFloor || n2 < kCsamNormFloor) continue;
    const double cosine = w.at(0, v);
    const double inv12 = 1.0 / (n1 * n2);
    const double k1 = cosine / (n1 * n1), k2 = cosine / (n2 * n2);
    for (int c = 0; c < f1.channels(); ++c) {
      const double a = f1.at(c, v), b = f2.at(c, v);
      df1.at(c, v) += T(g * (b * inv12 - k1 * a));
      df2.at(c, v) += T(g * (a * inv12 - k2 * b));
    }
  }
}

template <typename T>
AttentionField<T> csam_apply_backward(const Tensor<T>& f1, const AttentionField<T>& gate, const Tensor<T>& dout,
                                      Tensor<T>& df1) {
  require_field_for(f1, gate);
  AttentionField<T> dgate(1, f1.extent());
  const std::size_t n = f1.voxels();
  for (int c = 0; c < f1.channels(); ++c) {
    const T* src = f1.channel(c);
    const T* g = dout.channel(c);
    T* d = df1.channel(c);
    for (std::size_t v = 0; v < n; ++v) {
      d[v] += g[v] * gate.at(0, v);
      dgate.at(0, v) += g[v] * src[v];
    }
  }
  return dgate;
}

template <typename T>
AttentionField<T> csam_gate_backward(const AttentionField<T>& dgate, Gating mode) {
  if (mode != Gating::rescaled) return dgate;
  AttentionField<T> dw = dgate;
  for (T& v : dw.data()) v *= T(0.5);
  return dw;
}

#define PRIORNET_INSTANTIATE_CSAM(T)                                                                           \
  template AttentionField<T> csam_weights(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> csam_apply(const Tensor<T>&, const AttentionField<T>&);                                   \
  template AttentionField<T> csam_gate(const AttentionField<T>&, Gating);                                      \
  template void csam_weights_backward(const Tensor<T>&, const Tensor<T>&, const AttentionField<T>&,            \
                                      const AttentionField<T>&, Tensor<T>&, Tensor<T>&);                       \
  template AttentionField<T> csam_apply_backward(const Tensor<T>&, const AttentionField<T>&, const Tensor<T>&, \
                                                 Tensor<T>&);                                                  \
  template AttentionField<T> csam_gate_backward(const AttentionField<T>&, Gating);

PRIORNET_INSTANTIATE_CSAM(float)
PRIORNET_INSTANTIATE_CSAM(double)

}  // namespace priornet
