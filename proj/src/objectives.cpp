#include "priornet/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <sstream>

namespace priornet {

template <typename T>
Tensor<T> softmax(const Tensor<T>& logits) {
  Tensor<T> p(logits.channels(), logits.extent());
  const std::size_t n = logits.voxels();
  const int k = logits.channels();
  std::vector<double> e(static_cast<std::size_t>(k));
  for (std::size_t v = 0; v < n; ++v) {
    double m = logits.at(0, v);
    for (int c = 1; c < k; ++c) m = std::max(m, double(logits.at(c, v)));
    double z = 0.0;
    for (int c = 0; c < k; ++c) z += e[std::size_t(c)] = std::exp(double(logits.at(c, v)) - m);
    for (int c = 0; c < k; ++c) p.at(c, v) = T(e[std::size_t(c)] / z);
  }
  return p;
}

namespace {

template <typename T>
void require_one_hot(const Tensor<T>& target) {
  const std::size_t n = target.voxels();
  for (std::size_t v = 0; v < n; ++v) {
    int ones = 0;
    for (int c = 0; c < target.channels(); ++c) {
      const T x = target.at(c, v);
      if (x == T(1))
        ++ones;
      else if (x != T(0))
        throw LabelError("soft_dice_loss: target is not one-hot (value outside {0, 1})");
    }
    if (ones != 1) throw LabelError("soft_dice_loss: target is not one-hot (voxel without exactly one class)");
  }
}

}  // namespace

template <typename T>
DiceLoss<T> soft_dice_loss(std::span<const Tensor<T>> logits, std::span<const Tensor<T>> targets, double eps) {
  if (logits.empty() || logits.size() != targets.size())
    throw ShapeError("soft_dice_loss: need one target per logits tensor");
  const int channels = logits[0].channels();
  if (channels < 2) throw ShapeError("soft_dice_loss: need background plus at least one class");
  const int k = channels - 1;

  std::vector<Tensor<T>> probs;
  std::vector<double> inter(std::size_t(channels), 0.0), psum(std::size_t(channels), 0.0),
      gsum(std::size_t(channels), 0.0);
  for (std::size_t b = 0; b < logits.size(); ++b) {
    if (!logits[b].same_shape(targets[b]) || logits[b].channels() != channels)
      throw ShapeError("soft_dice_loss: logits " + shape_string(logits[b].channels(), logits[b].extent()) +
                       " and target " + shape_string(targets[b].channels(), targets[b].extent()) + " differ");
    require_one_hot(targets[b]);
    probs.push_back(softmax(logits[b]));
    for (int c = 1; c < channels; ++c) {
      const T* p = probs.back().channel(c);
      const T* g = targets[b].channel(c);
      double i = 0.0, ps = 0.0, gs = 0.0;
      for (std::size_t v = 0; v < logits[b].voxels(); ++v) {
        i += double(p[v]) * g[v];
        ps += p[v];
        gs += g[v];
      }
      inter[std::size_t(c)] += i;
      psum[std::size_t(c)] += ps;
      gsum[std::size_t(c)] += gs;
    }
  }

  DiceLoss<T> out;
  double dice_sum = 0.0;
  // d(loss)/d(p_c(v)) = -(1/K) * (2 g_c(v) den - num) / den^2
  std::vector<double> a(std::size_t(channels), 0.0), b0(std::size_t(channels), 0.0);
  for (int c = 1; c < channels; ++c) {
    const double num = 2.0 * inter[std::size_t(c)] + eps;
    const double den = psum[std::size_t(c)] + gsum[std::size_t(c)] + eps;
    dice_sum += num / den;
    a[std::size_t(c)] = -2.0 / (double(k) * den);
    b0[std::size_t(c)] = num / (double(k) * den * den);
  }
  out.loss = 1.0 - dice_sum / double(k);

  std::vector<double> dp(static_cast<std::size_t>(channels));
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const Tensor<T>& p = probs[b];
    Tensor<T> g(channels, p.extent());
    for (std::size_t v = 0; v < p.voxels(); ++v) {
      double dot = 0.0;
      for (int c = 0; c < channels; ++c) {
        dp[std::size_t(c)] = c == 0 ? 0.0 : a[std::size_t(c)] * targets[b].at(c, v) + b0[std::size_t(c)];
        dot += dp[std::size_t(c)] * p.at(c, v);
      }
      for (int c = 0; c < channels; ++c) g.at(c, v) = T(double(p.at(c, v)) * (dp[std::size_t(c)] - dot));
    }
    out.grads.push_back(std::move(g));
  }
  return out;
}

template <typename T>
DiceLoss<T> soft_dice_loss(const Tensor<T>& logits, const Tensor<T>& target, double eps) {
  return soft_dice_loss<T>(std::span<const Tensor<T>>(&logits, 1), std::span<const Tensor<T>>(&target, 1), eps);
}

DiceReport DiceReport::from_per_class(std::vector<double> per_class) {
  DiceReport r;
  r.per_class_dice = std::move(per_class);
  double s = 0.0;
  for (double d : r.per_class_dice) s += d;
  r.mean_foreground_dice = r.per_class_dice.empty() ? 0.0 : s / double(r.per_class_dice.size());
  return r;
}

DiceReport hard_dice_score(const LabelMap& pred, const LabelMap& gt) {
  if (!(pred.extent == gt.extent))
    throw ShapeError("hard_dice_score: shape mismatch (" + pred.extent.str() + " vs " + gt.extent.str() + ")");
  if (pred.num_classes != gt.num_classes)
    throw ShapeError("hard_dice_score: class counts differ (" + std::to_string(pred.num_classes) + " vs " +
                     std::to_string(gt.num_classes) + ")");
  pred.validate();
  gt.validate();
  const int k = gt.num_classes;
  std::vector<std::size_t> both(std::size_t(k) + 1, 0), np(std::size_t(k) + 1, 0), ng(std::size_t(k) + 1, 0);
  for (std::size_t v = 0; v < gt.data.size(); ++v) {
    const auto p = std::size_t(pred.data[v]), g = std::size_t(gt.data[v]);
    ++np[p];
    ++ng[g];
    if (p == g) ++both[p];
  }
  std::vector<double> dice;
  for (int c = 1; c <= k; ++c) {
    const std::size_t denom = np[std::size_t(c)] + ng[std::size_t(c)];
    dice.push_back(denom == 0 ? 1.0 : 2.0 * double(both[std::size_t(c)]) / double(denom));
  }
  return DiceReport::from_per_class(std::move(dice));
}

std::string to_table(const DiceReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(10) << "class" << "dice\n";
  for (std::size_t c = 0; c < report.per_class_dice.size(); ++c)
    os << std::setw(10) << (c + 1) << std::fixed << std::setprecision(4) << report.per_class_dice[c] << "\n";
  os << std::setw(10) << "mean" << std::fixed << std::setprecision(4) << report.mean_foreground_dice << "\n";
  return os.str();
}

std::string to_json(const DiceReport& report) {
  nlohmann::json j;
  j["per_class_dice"] = report.per_class_dice;
  j["mean_foreground_dice"] = report.mean_foreground_dice;
  return j.dump(2);
}

GradcheckResult finite_difference_gradcheck(const DifferentiableFn& fn, std::span<const double> point,
                                            const GradcheckOptions& options) {
  if (!(options.step > 0.0)) throw RangeError("gradcheck: step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> analytic;
  const double f0 = fn(x, &analytic);
  if (!std::isfinite(f0)) throw NumericError("gradcheck: function is not finite at the base point");
  if (analytic.size() != x.size()) throw ShapeError("gradcheck: analytic gradient has the wrong size");
  const std::uint64_t home = options.region ? options.region(x) : 0;

  std::vector<std::size_t> coordinates = options.coordinates;
  if (coordinates.empty()) {
    coordinates.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) coordinates[i] = i;
  }
  const int reach = options.stencil == Stencil::five_point ? 2 : 1;

  GradcheckResult result;
  for (std::size_t i : coordinates) {
    if (i >= x.size()) throw RangeError("gradcheck: coordinate out of range");
    const double orig = x[i];
    auto eval_at = [&](double value) {
      x[i] = value;
      const double f = fn(x, nullptr);
      if (!std::isfinite(f)) throw NumericError("gradcheck: non-finite evaluation at coordinate " + std::to_string(i));
      return f;
    };
    auto same_region = [&](double h) {
      if (!options.region) return true;
      bool same = true;
      for (int s = -reach; s <= reach && same; ++s) {
        if (s == 0) continue;
        x[i] = orig + s * h;
        same = options.region(x) == home;
      }
      x[i] = orig;
      return same;
    };

    double step = options.step;
    int refinements = 0;
    bool smooth = same_region(step);
    while (!smooth && refinements < options.max_refinements) {
      step /= 10.0;
      ++refinements;
      smooth = same_region(step);
    }
    if (!smooth) {
      ++result.coordinates_skipped;
      continue;
    }
    if (refinements > 0) ++result.coordinates_refined;

    // Divide by the step actually taken after rounding, not the nominal one.
    const double up = orig + step, down = orig - step;
    double numeric = (eval_at(up) - eval_at(down)) / (up - down);
    if (options.stencil == Stencil::five_point) {
      const double up2 = orig + 2.0 * step, down2 = orig - 2.0 * step;
      const double wide = (eval_at(up2) - eval_at(down2)) / (up2 - down2);
      numeric = (4.0 * numeric - wide) / 3.0;
    }
    x[i] = orig;
    const double err =
        std::fabs(analytic[i] - numeric) / std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-12});
    ++result.coordinates_checked;
    if (err > result.max_relative_error || result.coordinates_checked == 1) {
      result.max_relative_error = err;
      result.worst_coordinate = i;
      result.analytic = analytic[i];
      result.numeric = numeric;
    }
  }
  return result;
}

GradcheckResult finite_difference_gradcheck(const DifferentiableFn& fn, std::span<const double> point, double step,
                                            std::span<const std::size_t> coordinates, Stencil stencil) {
  GradcheckOptions options;
  options.step = step;
  options.coordinates.assign(coordinates.begin(), coordinates.end());
  options.stencil = stencil;
  return finite_difference_gradcheck(fn, point, options);
}

template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template DiceLoss<float> soft_dice_loss(std::span<const Tensor<float>>, std::span<const Tensor<float>>, double);
template DiceLoss<double> soft_dice_loss(std::span<const Tensor<double>>, std::span<const Tensor<double>>, double);
template DiceLoss<float> soft_dice_loss(const Tensor<float>&, const Tensor<float>&, double);
template DiceLoss<double> soft_dice_loss(const Tensor<double>&, const Tensor<double>&, double);

}  // namespace priornet
