#include "priornet/gradcheck.hpp"

#include <algorithm>

#include "priornet/csam.hpp"
#include "priornet/network.hpp"
#include "priornet/random.hpp"

namespace priornet {

namespace {

std::vector<double> normals(rng::Engine& e, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng::normal(e);
  return v;
}

Tensor<double> tensor_from(std::span<const double> values, int channels, const Extent& e) {
  Tensor<double> t(channels, e);
  std::copy(values.begin(), values.begin() + std::ptrdiff_t(t.data().size()), t.data().begin());
  return t;
}

// FNV-1a over every ReLU on/off bit and max-pool choice in the trace.
std::uint64_t activation_signature(const NetworkTrace<double>& trace) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ull;
  };
  auto block = [&](const BlockTrace<double>& b) {
    for (double v : b.hidden.data()) mix(v > 0.0);
    for (double v : b.output.data()) mix(v > 0.0);
  };
  for (const auto* levels : {&trace.image_levels, &trace.template_levels})
    for (const auto& l : *levels) {
      for (auto a : l.pool_argmax) mix(a);
      block(l.block);
    }
  for (const auto& d : trace.decoder) block(d.block);
  return h;
}

}  // namespace

GradcheckResult csam_gradcheck(std::uint64_t seed) {
  rng::Engine engine(rng::derive_seed(seed, 1));
  const Extent e = Extent::cube(4);
  const int channels = 8;
  const std::size_t n = std::size_t(channels) * e.voxels();
  const auto readout = tensor_from(normals(engine, n), channels, e);
  const auto point = normals(engine, 2 * n);

  DifferentiableFn fn = [&](std::span<const double> x, std::vector<double>* grad) {
    const auto f1 = tensor_from(x.first(n), channels, e);
    const auto f2 = tensor_from(x.subspan(n), channels, e);
    const auto w = csam_weights(f1, f2);
    const auto out = csam_apply(f1, w);
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) value += readout.data()[i] * out.data()[i];
    if (grad) {
      Tensor<double> df1(channels, e), df2(channels, e);
      const auto dw = csam_apply_backward(f1, w, readout, df1);
      csam_weights_backward(f1, f2, w, dw, df1, df2);
      grad->assign(df1.data().begin(), df1.data().end());
      grad->insert(grad->end(), df2.data().begin(), df2.data().end());
    }
    return value;
  };
  return finite_difference_gradcheck(fn, point, kSmoothStep, {}, Stencil::five_point);
}

GradcheckResult dice_gradcheck(std::uint64_t seed) {
  rng::Engine engine(rng::derive_seed(seed, 2));
  const Extent e = Extent::cube(4);
  const int classes = 4;  // background + 3
  const std::size_t n = std::size_t(classes) * e.voxels();
  std::vector<Tensor<double>> targets;
  for (int b = 0; b < 2; ++b) {
    LabelMap labels(e, classes - 1);
    for (auto& l : labels.data) l = int(rng::index(engine, std::size_t(classes)));
    targets.push_back(one_hot_encode<double>(labels));
  }
  const auto point = normals(engine, 2 * n);

  DifferentiableFn fn = [&](std::span<const double> x, std::vector<double>* grad) {
    const std::vector<Tensor<double>> logits{tensor_from(x.first(n), classes, e),
                                             tensor_from(x.subspan(n), classes, e)};
    const auto loss = soft_dice_loss<double>(logits, targets);
    if (grad) {
      grad->assign(loss.grads[0].data().begin(), loss.grads[0].data().end());
      grad->insert(grad->end(), loss.grads[1].data().begin(), loss.grads[1].data().end());
    }
    return loss.loss;
  };
  return finite_difference_gradcheck(fn, point, kSmoothStep, {}, Stencil::five_point);
}

GradcheckResult network_gradcheck(std::uint64_t seed) {
  rng::Engine engine(rng::derive_seed(seed, 3));
  NetworkConfig cfg;
  cfg.num_levels = 3;
  cfg.base_channels = 2;
  cfg.num_classes = 2;
  cfg.variant = Variant::priornet;
  cfg.seed = seed;
  const auto params = init_parameters(cfg);
  const auto table = cast_parameters<double>(params);
  const Network<double> net(cfg);
  const Extent e = Extent::cube(8);

  // Two slabs and a background; the template is noise around the same layout.
  LabelMap labels(e, 2);
  for (int i = 0; i < e.h; ++i)
    for (int j = 0; j < e.w; ++j)
      for (int k = 0; k < e.d; ++k) labels(i, j, k) = i < 3 ? 1 : (j < 3 ? 2 : 0);
  const auto target = one_hot_encode<double>(labels);
  Volume templ_image(e);
  for (auto& v : templ_image.data) v = float(rng::normal(engine));
  const auto templ = template_tensor<double>(extract_foreground_regions(templ_image, labels));
  const auto point = normals(engine, e.voxels());

  DifferentiableFn fn = [&](std::span<const double> x, std::vector<double>* grad) {
    const auto input = tensor_from(x, 1, e);
    NetworkTrace<double> trace;
    const auto logits = net.forward(input, &templ, table, &trace);
    const auto loss = soft_dice_loss(logits, target);
    if (grad) {
      auto grads = zero_table<double>(params);
      const auto dinput = net.backward(trace, loss.grads[0], table, grads);
      grad->assign(dinput.data().begin(), dinput.data().end());
    }
    return loss.loss;
  };
  GradcheckOptions options;
  options.step = kKinkedStep;
  options.stencil = Stencil::five_point;
  options.region = [&](std::span<const double> x) {
    NetworkTrace<double> trace;
    net.forward(tensor_from(x, 1, e), &templ, table, &trace);
    return activation_signature(trace);
  };
  return finite_difference_gradcheck(fn, point, options);
}

GradcheckSuite run_gradchecks(std::uint64_t seed) {
  return {csam_gradcheck(seed), dice_gradcheck(seed), network_gradcheck(seed)};
}

}  // namespace priornet
