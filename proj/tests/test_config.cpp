#include <doctest.h>

#include <fstream>

#include "priornet/config.hpp"
#include "support.hpp"

using namespace priornet;

namespace {

std::string error_of(const std::string& text) {
  try {
    parse_config_text(text, "x.cfg");
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("an empty file gives the paper regime") {
  const auto c = parse_config_text("");
  CHECK(c.network.num_levels == 4);
  CHECK(c.network.base_channels == 16);
  CHECK(c.network.variant == Variant::priornet);
  CHECK(c.network.dimensionality == 3);
  CHECK(c.train.epochs == 60);
  CHECK(c.train.batch_size == 2);
  CHECK(c.train.lr_start == 0.02);
  CHECK(c.train.lr_end == 1e-6);
  CHECK(c.eval.ablation_seeds == std::vector<std::uint64_t>{0, 1, 2});
}

TEST_CASE("keys land in their sections") {
  const auto c = parse_config_text(R"(# comment
[network]
variant = dual_encoder   # trailing comment
num_classes = 5
normalization = none
csam_gating = residual
[train]
epochs = 7
lr_start = 0.5
[data]
manifest = data/m.txt
crop = 16, 16, 8
truncate = -100, 240
zscore = true
test_fraction = 0.25
[eval]
ablation_seeds = 4, 5
[synthetic]
shape = 24, 24
format = nifti
)");
  CHECK(c.network.variant == Variant::dual_encoder);
  CHECK(c.network.num_classes == 5);
  CHECK(c.network.normalization == Normalization::none);
  CHECK(c.network.gating == Gating::residual);
  CHECK(c.train.epochs == 7);
  CHECK(c.train.lr_start == 0.5);
  CHECK(c.data.crop == std::vector<int>{16, 16, 8});
  CHECK(c.data.truncate == std::pair{-100.0, 240.0});
  CHECK(c.data.zscore);
  CHECK(c.data.test_fraction == 0.25);
  CHECK(c.eval.ablation_seeds == std::vector<std::uint64_t>{4, 5});
  CHECK(c.synthetic.shape == std::vector<int>{24, 24});
  CHECK(c.synthetic.extension == ".nii");
}

TEST_CASE("errors name the file and line") {
  CHECK(error_of("[network]\n\nvariant = priornetX\n").starts_with("x.cfg:3:"));
  CHECK(error_of("[network]\nwidth = 3\n").find("unknown key 'width'") != std::string::npos);
  CHECK(error_of("[model]\n").find("x.cfg:1: unknown section") != std::string::npos);
  CHECK(error_of("epochs = 3\n").find("before any section") != std::string::npos);
  CHECK(error_of("[train]\nepochs = three\n").starts_with("x.cfg:2:"));
  CHECK(error_of("[train]\nepochs\n").starts_with("x.cfg:2:"));
  CHECK(error_of("[data]\ntruncate = 1, 2, 3\n").starts_with("x.cfg:2:"));
  CHECK(!error_of("[train]\nbatch_size = 0\n").empty());
  CHECK(!error_of("[network]\nnum_levels = 0\n").empty());
}

TEST_CASE("to_text parses back to the same configuration") {
  const auto c = parse_config_text("[network]\nvariant = single_encoder\nseed = 12\n[train]\nlr_end = 3.3e-7\n"
                                   "[data]\nmanifest = m.txt\ntest_count = 4\n[synthetic]\nclass_means = 1.5, 2\n");
  const std::string text = c.to_text();
  const auto back = parse_config_text(text);
  CHECK(back.to_text() == text);
  CHECK(back.network.canonical() == c.network.canonical());
  CHECK(back.train.canonical() == c.train.canonical());
  CHECK(back.data.test_count == std::optional<std::size_t>{4});
  CHECK(back.synthetic.class_means == std::vector<double>{1.5, 2.0});
}

TEST_CASE("config files resolve the manifest against their own directory") {
  testing::TempDir dir("cfg");
  std::filesystem::create_directories(dir / "sub");
  std::ofstream(dir / "sub" / "run.cfg") << "[data]\nmanifest = ../data/manifest.txt\n";
  const auto c = parse_config(dir / "sub" / "run.cfg");
  CHECK(c.manifest_path() == dir / "sub" / "../data/manifest.txt");
  CHECK_THROWS_WITH_AS(parse_config(dir / "nope.cfg"), doctest::Contains("nope.cfg"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("").manifest_path(), ConfigError);
}

TEST_CASE("load_data checks the class count against the manifest") {
  testing::TempDir dir("cfg");
  SyntheticSpec s;
  s.num_volumes = 3;
  s.shape = {8, 8, 8};
  s.num_classes = 1;
  s.radius_min = 1.0;
  s.radius_max = 2.0;
  generate_synthetic_dataset(s, dir / "data");
  std::ofstream(dir / "ok.cfg") << "[network]\nnum_classes = 1\n[data]\nmanifest = data/manifest.txt\ntest_count = 1\n";
  const auto data = load_data(parse_config(dir / "ok.cfg"));
  CHECK(data.size() == 3);
  CHECK(data.manifest().indices(Split::test).size() == 1);
  std::ofstream(dir / "bad.cfg") << "[network]\nnum_classes = 2\n[data]\nmanifest = data/manifest.txt\n";
  CHECK_THROWS_AS(load_data(parse_config(dir / "bad.cfg")), ConfigError);
}
