#include <doctest.h>

#include <cmath>
#include <set>

#include "priornet/evaluation.hpp"
#include "support.hpp"

using namespace priornet;
using testing::Engine;

namespace {

// Ten 16^3 volumes, 4 held out.
const DatasetCache& eval_data() {
  static testing::TempDir dir("eval");
  static const DatasetCache cache = [] {
    SyntheticSpec s;
    s.num_volumes = 10;
    s.shape = {16, 16, 16};
    s.num_classes = 2;
    s.radius_min = 2.0;
    s.radius_max = 3.0;
    s.position_jitter = 1.0;
    s.seed = 8;
    const auto m = generate_synthetic_dataset(s, dir.path());
    return DatasetCache(split_dataset(m, {4, 0.0}, 1));
  }();
  return cache;
}

Checkpoint untrained(Variant v = Variant::priornet, int ndim = 3) {
  Checkpoint c;
  c.network.variant = v;
  c.network.num_classes = 2;
  c.network.base_channels = 2;
  c.network.num_levels = 3;
  c.network.dimensionality = ndim;
  c.network.seed = 1;
  c.params = init_parameters(c.network);
  return c;
}

}  // namespace

TEST_CASE("aggregate is the per-class mean over volumes, then the class mean") {
  const std::vector<DiceReport> rows{DiceReport::from_per_class({1.0, 0.5}), DiceReport::from_per_class({0.0, 0.5}),
                                     DiceReport::from_per_class({0.5, 0.2})};
  const auto a = aggregate_volumes(rows);
  CHECK(a.per_class_dice[0] == doctest::Approx(0.5));
  CHECK(a.per_class_dice[1] == doctest::Approx(0.4));
  CHECK(a.mean_foreground_dice == doctest::Approx(0.45));
  double row_mean = 0.0;
  for (const auto& r : rows) row_mean += r.mean_foreground_dice;
  CHECK(a.mean_foreground_dice == doctest::Approx(row_mean / 3));
  CHECK_THROWS_AS(aggregate_volumes({}), DataError);
}

TEST_CASE("median of odd and even counts") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK(median({7.0}) == 7.0);
}

TEST_CASE("the comparison table has four rows in the published layout") {
  const auto ref = reference_ablation_table();
  const std::string t = ref.table();
  CHECK(t.find("Method") != std::string::npos);
  CHECK(t.find("Dice (%)") != std::string::npos);
  for (const char* name : {"Baseline", "Single encoder", "Dual encoder", "Prior-Net"})
    CHECK(t.find(name) != std::string::npos);
  CHECK(t.find("89.07") != std::string::npos);
  CHECK(t.find("83.10") != std::string::npos);
  CHECK(ref.rows.size() == 4);
  CHECK(ref.row(Variant::dual_encoder).median == doctest::Approx(0.8658));
  CHECK(ref.json().find("\"Prior-Net\"") != std::string::npos);
}

TEST_CASE("templates come from the train split") {
  const auto& data = eval_data();
  std::set<std::size_t> seen;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto t = choose_template(data.manifest(), seed);
    CHECK(data.manifest().entries[t].split == Split::train);
    seen.insert(t);
  }
  CHECK(seen.size() == 6);
  const auto test = data.manifest().indices(Split::test);
  CHECK_THROWS_AS(evaluate_with_template(data, untrained(), test.front()), DataError);
}

TEST_CASE("predictions are label maps on the target grid") {
  const auto& data = eval_data();
  const auto& s = data.at(0);
  const auto bundle = make_bundle(data.at(1));
  for (Variant v : all_variants()) {
    const auto pred = predict_segmentation(s.image, bundle, untrained(v));
    CHECK(pred.extent == s.image.extent);
    CHECK(pred.num_classes == 2);
    CHECK_NOTHROW(pred.validate());
  }
  // A 2D network walks the axial slices.
  const auto pred2 = predict_segmentation(s.image, bundle, untrained(Variant::priornet, 2));
  CHECK(pred2.extent == s.image.extent);
  CHECK_THROWS_AS(predict_segmentation(center_crop(s.image, {12, 12, 12}), bundle, untrained()), CompatibilityError);
  CHECK_THROWS_AS(predict_segmentation(s.image, make_bundle(Sample{center_crop(s.image, {8, 8, 8}),
                                                                   center_crop(s.labels, {8, 8, 8})}),
                                       untrained()),
                  CompatibilityError);
}

TEST_CASE("an untrained network scores poorly") {
  const auto r = evaluate_dataset(eval_data(), untrained(), 0);
  CHECK(r.volumes.size() == 4);
  CHECK(r.aggregate.mean_foreground_dice < 0.5);
  for (const auto& v : r.volumes) CHECK(eval_data().manifest().entries[v.entry].split == Split::test);
  CHECK(r.table().find("mean") != std::string::npos);
  CHECK(r.json().find("\"template_entry\"") != std::string::npos);
}

TEST_CASE("robustness over templates") {
  const auto& data = eval_data();
  const auto ckpt = untrained();
  const auto one = template_robustness_study(data, ckpt, 1, 0);
  CHECK(one.spread == 0.0);
  CHECK(one.stddev == 0.0);
  const auto many = template_robustness_study(data, ckpt, 4, 0);
  CHECK(std::set<std::size_t>(many.templates.begin(), many.templates.end()).size() == 4);
  for (auto t : many.templates) CHECK(data.manifest().entries[t].split == Split::train);
  const auto [lo, hi] = std::minmax_element(many.means.begin(), many.means.end());
  CHECK(many.spread == *hi - *lo);
  CHECK_THROWS_AS(template_robustness_study(data, ckpt, 7, 0), ConfigError);
  CHECK_THROWS_AS(template_robustness_study(data, ckpt, 0, 0), ConfigError);
}

TEST_CASE("class count mismatches are caught") {
  auto ckpt = untrained();
  ckpt.network.num_classes = 3;
  ckpt.params = init_parameters(ckpt.network);
  CHECK_THROWS_AS(evaluate_dataset(eval_data(), ckpt, 0), CompatibilityError);
}
