#pragma once

#include <string>

#include "priornet/tensor.hpp"

// Cosine-similarity attention: per spatial position, the cosine of the angle
// between the channel vectors of two feature maps gates the first map.
namespace priornet {

// Norm floor below which a channel vector counts as dead; the weight there is 0.
inline constexpr double kCsamNormFloor = 1e-8;

// How the cosine weight w turns into the multiplicative gate.
//   raw       gate = w
//   rescaled  gate = (1 + w) / 2
//   residual  gate = 1 + w
enum class Gating { raw, rescaled, residual };

std::string to_string(Gating g);
Gating parse_gating(const std::string& s);

template <typename T>
AttentionField<T> csam_weights(const Tensor<T>& f1, const Tensor<T>& f2);

// output(c, v) = f1(c, v) * w(v)
template <typename T>
Tensor<T> csam_apply(const Tensor<T>& f1, const AttentionField<T>& w);

template <typename T>
AttentionField<T> csam_gate(const AttentionField<T>& w, Gating mode);

// Accumulates d(loss)/d(f1) and d(loss)/d(f2) given d(loss)/d(w).
template <typename T>
void csam_weights_backward(const Tensor<T>& f1, const Tensor<T>& f2, const AttentionField<T>& w,
                           const AttentionField<T>& dw, Tensor<T>& df1, Tensor<T>& df2);

// Accumulates d(loss)/d(f1) and returns d(loss)/d(gate).
template <typename T>
AttentionField<T> csam_apply_backward(const Tensor<T>& f1, const AttentionField<T>& gate, const Tensor<T>& dout,
                                      Tensor<T>& df1);

template <typename T>
AttentionField<T> csam_gate_backward(const AttentionField<T>& dgate, Gating mode);

}  // namespace priornet
