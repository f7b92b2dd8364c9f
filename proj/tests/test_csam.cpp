#include <doctest.h>

#include <cmath>

#include "priornet/csam.hpp"
#include "priornet/gradcheck.hpp"
#include "support.hpp"

using namespace priornet;
using testing::Engine;

namespace {

double scalar_cosine(const Tensor<double>& a, const Tensor<double>& b, std::size_t v) {
  double d = 0.0, na = 0.0, nb = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    d += a.at(c, v) * b.at(c, v);
    na += a.at(c, v) * a.at(c, v);
    nb += b.at(c, v) * b.at(c, v);
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na < kCsamNormFloor || nb < kCsamNormFloor) return 0.0;
  return d / (na * nb);
}

}  // namespace

TEST_CASE("cosine weights match the per-voxel formula") {
  Engine eng(31);
  for (int trial = 0; trial < 25; ++trial) {
    const Extent e = testing::random_extent(eng, 1, 5, trial % 2 ? 2 : 3);
    const int ch = 1 + int(rng::index(eng, 8));
    const auto f1 = testing::random_tensor(eng, ch, e), f2 = testing::random_tensor(eng, ch, e);
    const auto w = csam_weights(f1, f2);
    REQUIRE(w.channels() == 1);
    REQUIRE(w.extent() == e);
    for (std::size_t v = 0; v < e.voxels(); ++v) {
      CHECK(std::fabs(w.at(0, v) - scalar_cosine(f1, f2, v)) < 1e-12);
      CHECK(std::fabs(w.at(0, v)) <= 1.0);
    }
  }
}

TEST_CASE("a single channel gives the sign of the product") {
  Tensor<double> a(1, Extent::from_dims({1, 3})), b(1, Extent::from_dims({1, 3}));
  a.data() = {2.0, -3.0, 0.5};
  b.data() = {4.0, 1.0, -0.1};
  CHECK(csam_weights(a, b).data() == std::vector<double>{1.0, -1.0, -1.0});
}

TEST_CASE("dead channel vectors get zero weight") {
  Engine eng(32);
  auto f1 = testing::random_tensor(eng, 4, Extent::cube(2));
  const auto f2 = testing::random_tensor(eng, 4, Extent::cube(2));
  for (int c = 0; c < 4; ++c) f1.at(c, 3) = 0.0;
  const auto w = csam_weights(f1, f2);
  CHECK(w.at(0, 3) == 0.0);
  CHECK(all_finite(w));
}

TEST_CASE("identical and opposite maps give +1 and -1") {
  Engine eng(33);
  const auto f = testing::random_tensor(eng, 5, Extent::cube(3));
  Tensor<double> neg = f;
  for (double& v : neg.data()) v = -v;
  const auto same = csam_weights(f, f), opposite = csam_weights(f, neg);
  for (double v : same.data()) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  for (double v : opposite.data()) CHECK(v == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("attention scales every channel of a voxel by the same weight") {
  Engine eng(34);
  const auto f1 = testing::random_tensor(eng, 3, Extent::cube(3));
  const auto f2 = testing::random_tensor(eng, 3, Extent::cube(3));
  const auto w = csam_weights(f1, f2);
  const auto out = csam_apply(f1, w);
  for (int c = 0; c < 3; ++c)
    for (std::size_t v = 0; v < f1.voxels(); ++v) CHECK(out.at(c, v) == f1.at(c, v) * w.at(0, v));
  CHECK_THROWS_AS(csam_apply(f1, AttentionField<double>(1, Extent::cube(2))), ShapeError);
  CHECK_THROWS_AS(csam_weights(f1, testing::random_tensor(eng, 2, Extent::cube(3))), ShapeError);
}

TEST_CASE("gating modes") {
  AttentionField<double> w(1, Extent::from_dims({1, 3}));
  w.data() = {-1.0, 0.0, 0.5};
  CHECK(csam_gate(w, Gating::raw).data() == w.data());
  CHECK(csam_gate(w, Gating::rescaled).data() == std::vector<double>{0.0, 0.5, 0.75});
  CHECK(csam_gate(w, Gating::residual).data() == std::vector<double>{0.0, 1.0, 1.5});
  CHECK(parse_gating("residual") == Gating::residual);
  CHECK_THROWS_AS(parse_gating("soft"), ConfigError);
}

TEST_CASE("attention gradients agree with finite differences") {
  for (std::uint64_t seed : {0u, 1u, 2u, 3u}) CHECK(csam_gradcheck(seed).max_relative_error < kGradcheckTolerance);
}

TEST_CASE("gate backward is the derivative of the gate") {
  AttentionField<double> g(1, Extent::from_dims({1, 2}));
  g.data() = {1.0, -2.0};
  CHECK(csam_gate_backward(g, Gating::raw).data() == g.data());
  CHECK(csam_gate_backward(g, Gating::residual).data() == g.data());
  CHECK(csam_gate_backward(g, Gating::rescaled).data() == std::vector<double>{0.5, -1.0});
}
