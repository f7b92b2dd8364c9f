#include <doctest.h>

#include <cmath>

#include "priornet/layers.hpp"
#include "priornet/objectives.hpp"
#include "support.hpp"

using namespace priornet;
using testing::Engine;

namespace {

// Direct "same" convolution, one output at a time.
Tensor<double> naive_conv(const Tensor<double>& x, const std::vector<double>& w, const std::vector<double>& b,
                          int cout, int ks) {
  const Extent e = x.extent();
  const int r = ks / 2;
  const int kd = e.ndim == 3 ? ks : 1, rd = e.ndim == 3 ? r : 0;
  Tensor<double> y(cout, e);
  for (int o = 0; o < cout; ++o)
    for (int i = 0; i < e.h; ++i)
      for (int j = 0; j < e.w; ++j)
        for (int k = 0; k < e.d; ++k) {
          double s = b.empty() ? 0.0 : b[std::size_t(o)];
          for (int c = 0; c < x.channels(); ++c)
            for (int a = 0; a < ks; ++a)
              for (int bb = 0; bb < ks; ++bb)
                for (int g = 0; g < kd; ++g) {
                  const int ii = i + a - r, jj = j + bb - r, kk = k + g - rd;
                  if (ii < 0 || jj < 0 || kk < 0 || ii >= e.h || jj >= e.w || kk >= e.d) continue;
                  const std::size_t widx = ((std::size_t(o) * std::size_t(x.channels()) + std::size_t(c)) * ks + a) *
                                               std::size_t(ks * kd) +
                                           std::size_t(bb * kd + g);
                  s += w[widx] * x(ii, jj, kk, c);
                }
          y(i, j, k, o) = s;
        }
  return y;
}

std::vector<double> randn(Engine& e, std::size_t n) {
  std::vector<double> v(n);
  for (double& x : v) x = rng::normal(e);
  return v;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("convolution matches a direct loop") {
  Engine eng(21);
  for (int ndim : {2, 3})
    for (int ks : {1, 3})
      for (int trial = 0; trial < 4; ++trial) {
        const Extent e = testing::random_extent(eng, 1, 6, ndim);
        const int cin = 1 + int(rng::index(eng, 3)), cout = 1 + int(rng::index(eng, 3));
        const auto x = testing::random_tensor(eng, cin, e);
        const auto w = randn(eng, layers::conv_weight_count(cin, cout, ks, ndim));
        const auto b = trial % 2 ? randn(eng, std::size_t(cout)) : std::vector<double>{};
        const auto y = layers::conv_forward<double>(x, w, b, cout, ks);
        const auto ref = naive_conv(x, w, b, cout, ks);
        REQUIRE(y.same_shape(ref));
        for (std::size_t n = 0; n < y.size(); ++n) CHECK(y.data()[n] == doctest::Approx(ref.data()[n]).epsilon(1e-12));
      }
}

TEST_CASE("convolution backward agrees with finite differences") {
  Engine eng(22);
  const Extent e = Extent::from_dims({4, 3, 5});
  const int cin = 2, cout = 3, ks = 3;
  const auto dy = testing::random_tensor(eng, cout, e);
  const std::size_t nx = std::size_t(cin) * e.voxels(), nw = layers::conv_weight_count(cin, cout, ks, 3);
  std::vector<double> point = randn(eng, nx + nw + std::size_t(cout));
  DifferentiableFn fn = [&](std::span<const double> p, std::vector<double>* grad) {
    Tensor<double> x(cin, e);
    std::copy(p.begin(), p.begin() + std::ptrdiff_t(nx), x.data().begin());
    const auto w = p.subspan(nx, nw);
    const auto b = p.subspan(nx + nw);
    const auto y = layers::conv_forward<double>(x, w, b, cout, ks);
    if (grad) {
      grad->assign(p.size(), 0.0);
      std::span<double> g(*grad);
      const auto dx = layers::conv_backward<double>(x, w, dy, ks, g.subspan(nx, nw), g.subspan(nx + nw), true);
      std::copy(dx.data().begin(), dx.data().end(), grad->begin());
    }
    return dot(y.data(), dy.data());
  };
  const auto r = finite_difference_gradcheck(fn, point, 1e-3, {}, Stencil::five_point);
  CHECK(r.max_relative_error < 1e-6);
}

TEST_CASE("instance norm standardises each channel, then applies the affine map") {
  Engine eng(23);
  const Extent e = Extent::cube(5);
  auto x = testing::random_tensor(eng, 3, e, 4.0);
  for (double& v : x.data()) v += 7.0;
  const std::vector<double> scale{1.0, 2.0, 0.5}, shift{0.0, -1.0, 3.0};
  layers::NormCache<double> cache;
  const auto y = layers::instance_norm_forward<double>(x, scale, shift, 1e-5, cache);
  for (int c = 0; c < 3; ++c) {
    double m = 0.0, s = 0.0;
    for (double v : y.channel_span(c)) m += v;
    m /= double(e.voxels());
    for (double v : y.channel_span(c)) s += (v - m) * (v - m);
    CHECK(m == doctest::Approx(shift[std::size_t(c)]).epsilon(1e-9));
    CHECK(std::sqrt(s / double(e.voxels())) == doctest::Approx(scale[std::size_t(c)]).epsilon(1e-5));
  }
}

TEST_CASE("instance norm backward agrees with finite differences") {
  Engine eng(24);
  const Extent e = Extent::from_dims({3, 4, 2});
  const int ch = 2;
  const std::size_t nx = std::size_t(ch) * e.voxels();
  const auto dy = testing::random_tensor(eng, ch, e);
  std::vector<double> point = randn(eng, nx + 2 * std::size_t(ch));
  DifferentiableFn fn = [&](std::span<const double> p, std::vector<double>* grad) {
    Tensor<double> x(ch, e);
    std::copy(p.begin(), p.begin() + std::ptrdiff_t(nx), x.data().begin());
    layers::NormCache<double> cache;
    const auto scale = p.subspan(nx, std::size_t(ch));
    const auto y = layers::instance_norm_forward<double>(x, scale, p.subspan(nx + std::size_t(ch)), 1e-5, cache);
    if (grad) {
      grad->assign(p.size(), 0.0);
      std::span<double> g(*grad);
      const auto dx = layers::instance_norm_backward<double>(dy, scale, cache, g.subspan(nx, std::size_t(ch)),
                                                             g.subspan(nx + std::size_t(ch)));
      std::copy(dx.data().begin(), dx.data().end(), grad->begin());
    }
    return dot(y.data(), dy.data());
  };
  const auto r = finite_difference_gradcheck(fn, point, 1e-3, {}, Stencil::five_point);
  CHECK(r.max_relative_error < 1e-5);
}

TEST_CASE("max pooling picks the block maximum and routes gradients back to it") {
  Engine eng(25);
  for (int ndim : {2, 3}) {
    const Extent e = ndim == 3 ? Extent::from_dims({4, 6, 2}) : Extent::from_dims({6, 4});
    const auto x = testing::random_tensor(eng, 2, e);
    std::vector<std::uint32_t> argmax;
    const auto y = layers::max_pool_forward(x, argmax);
    REQUIRE(y.extent() == e.halved());
    const int kd = ndim == 3 ? 2 : 1;
    for (int c = 0; c < 2; ++c)
      for (int i = 0; i < y.extent().h; ++i)
        for (int j = 0; j < y.extent().w; ++j)
          for (int k = 0; k < y.extent().d; ++k) {
            double best = -1e300;
            for (int a = 0; a < 2; ++a)
              for (int b = 0; b < 2; ++b)
                for (int g = 0; g < kd; ++g) best = std::max(best, x(2 * i + a, 2 * j + b, kd * k + g, c));
            CHECK(y(i, j, k, c) == best);
          }
    const auto dy = testing::random_tensor(eng, 2, y.extent());
    const auto dx = layers::max_pool_backward(e, argmax, dy);
    // Adjoint identity: <pool'(dy), x> picks exactly the pooled entries.
    CHECK(dot(dx.data(), x.data()) == doctest::Approx(dot(dy.data(), y.data())).epsilon(1e-12));
    std::size_t nonzero = 0;
    for (double v : dx.data()) nonzero += v != 0.0;
    CHECK(nonzero == y.size());
  }
}

TEST_CASE("nearest upsampling and its backward are adjoint") {
  Engine eng(26);
  for (int ndim : {2, 3}) {
    const Extent e = testing::random_extent(eng, 1, 4, ndim);
    const auto x = testing::random_tensor(eng, 3, e);
    const auto up = layers::upsample_forward(x);
    REQUIRE(up.extent() == e.doubled());
    const auto dy = testing::random_tensor(eng, 3, up.extent());
    const auto back = layers::upsample_backward(dy);
    CHECK(dot(up.data(), dy.data()) == doctest::Approx(dot(x.data(), back.data())).epsilon(1e-12));
    CHECK(up(2 * e.h - 1, 0, 0, 1) == x(e.h - 1, 0, 0, 1));
  }
}

TEST_CASE("relu backward masks on the output") {
  Tensor<double> x(1, Extent::from_dims({1, 4}));
  x.data() = {-1.0, 0.0, 2.0, 3.0};
  layers::relu_inplace(x);
  CHECK(x.data() == std::vector<double>{0.0, 0.0, 2.0, 3.0});
  Tensor<double> dy(1, x.extent(), 1.0);
  CHECK(layers::relu_backward(x, dy).data() == std::vector<double>{0.0, 0.0, 1.0, 1.0});
}
