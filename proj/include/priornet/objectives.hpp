#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "priornet/tensor.hpp"
#include "priornet/volume.hpp"

namespace priornet {

inline constexpr double kDiceSmoothing = 1e-5;

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits);

template <typename T>
struct DiceLoss {
  double loss = 0.0;
  std::vector<Tensor<T>> grads;  // d(loss)/d(logits), one per batch item
};

// Multi-class soft Dice over foreground classes 1..K. Class statistics are
// summed over the whole batch before forming each ratio:
//   d_c = (2 sum(p_c g_c) + eps) / (sum(p_c) + sum(g_c) + eps)
//   loss = 1 - mean_c d_c
// Throws LabelError when a target is not one-hot.
template <typename T>
DiceLoss<T> soft_dice_loss(std::span<const Tensor<T>> logits, std::span<const Tensor<T>> targets,
                           double eps = kDiceSmoothing);

template <typename T>
DiceLoss<T> soft_dice_loss(const Tensor<T>& logits, const Tensor<T>& target, double eps = kDiceSmoothing);

struct DiceReport {
  std::vector<double> per_class_dice;  // foreground classes 1..K
  double mean_foreground_dice = 0.0;

  static DiceReport from_per_class(std::vector<double> per_class);
};

// 2|P n G| / (|P| + |G|) per foreground class; 1 when both sets are empty.
DiceReport hard_dice_score(const LabelMap& pred, const LabelMap& gt);

std::string to_table(const DiceReport& report);
std::string to_json(const DiceReport& report);

// Value of a scalar function; fills *grad with the analytic gradient when
// grad is non-null.
using DifferentiableFn = std::function<double(std::span<const double> x, std::vector<double>* grad)>;

struct GradcheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_coordinate = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates_checked = 0;
  std::size_t coordinates_refined = 0;  // needed a narrower step to stay off a kink
  std::size_t coordinates_skipped = 0;  // a kink sat within every step tried
};

// three_point: (f(x+h) - f(x-h)) / 2h, error O(h^2).
// five_point: Richardson combination of the h and 2h central differences,
// error O(h^4); only meaningful where fn is smooth over [x-2h, x+2h].
enum class Stencil { three_point, five_point };

// Identifies the smooth piece of a piecewise-smooth function, e.g. a hash of
// its ReLU masks. Differences are only trusted when every stencil point lies
// in the same piece as the base point.
using RegionFn = std::function<std::uint64_t(std::span<const double> x)>;

struct GradcheckOptions {
  double step = 1e-5;
  std::vector<std::size_t> coordinates;  // empty means every coordinate
  Stencil stencil = Stencil::three_point;
  RegionFn region;
  int max_refinements = 3;  // each divides the step by 10
};

// Compares the analytic gradient at `point` with finite differences:
//   max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-12).
GradcheckResult finite_difference_gradcheck(const DifferentiableFn& fn, std::span<const double> point,
                                            const GradcheckOptions& options);

GradcheckResult finite_difference_gradcheck(const DifferentiableFn& fn, std::span<const double> point, double step,
                                            std::span<const std::size_t> coordinates = {},
                                            Stencil stencil = Stencil::three_point);

}  // namespace priornet
