#include <doctest.h>

#include <fstream>
#include <sstream>

#include "priornet/cli.hpp"
#include "priornet/dataset.hpp"
#include "priornet/io.hpp"
#include "support.hpp"

using namespace priornet;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_command(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path only_subdir(const std::filesystem::path& root) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root)) dirs.push_back(e.path());
  REQUIRE(dirs.size() == 1);
  return dirs.front();
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == kExitUsage);
  const auto r = run({"frobnicate"});
  CHECK(r.code == kExitUsage);
  CHECK(r.err.find("frobnicate") != std::string::npos);
  CHECK(run({"gradcheck", "--bogus"}).code == kExitUsage);
  CHECK(run({"train"}).code == kExitUsage);
  CHECK(run({"--help"}).code == kExitOk);
}

TEST_CASE("runtime failures exit with 1 and one error line") {
  const auto r = run({"train", "/nonexistent/missing.cfg"});
  CHECK(r.code == kExitFailure);
  CHECK(r.err.starts_with("error: "));
  CHECK(r.err.find("missing.cfg") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("gradcheck passes") {
  const auto r = run({"gradcheck", "--seed", "3"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("PASS") != std::string::npos);
}

TEST_CASE("run directories never collide") {
  testing::TempDir dir("cli");
  const auto a = make_run_directory(dir.path(), "eval"), b = make_run_directory(dir.path(), "eval");
  CHECK(a != b);
  CHECK(a.filename().string().ends_with("-eval"));
  CHECK(std::filesystem::is_directory(b));
}

TEST_CASE("generate, train, evaluate, predict") {
  testing::TempDir dir("cli");
  std::ofstream(dir / "run.cfg") << R"([network]
num_classes = 1
base_channels = 2
num_levels = 2
[train]
epochs = 2
checkpoint = model.ckpt
[data]
manifest = data/manifest.txt
test_count = 1
[synthetic]
num_volumes = 4
shape = 8, 8, 8
num_classes = 1
radius_min = 1.5
radius_max = 2
)";
  const std::string cfg = (dir / "run.cfg").string(), runs = (dir / "runs").string();

  auto g = run({"gen-data", cfg, (dir / "data").string()});
  REQUIRE(g.code == kExitOk);
  CHECK(g.out.find("3 train, 1 test") != std::string::npos);

  auto t = run({"train", cfg, "--runs-dir", runs});
  REQUIRE(t.code == kExitOk);
  CHECK(t.out.find("epoch 2/2") != std::string::npos);
  CHECK(std::filesystem::exists(dir / "model.ckpt"));
  const auto train_dir = only_subdir(dir / "runs");
  CHECK(std::filesystem::exists(train_dir / "train.log"));
  CHECK(std::filesystem::exists(train_dir / "config.txt"));

  auto e = run({"eval", cfg, "--runs-dir", (dir / "eval-runs").string()});
  REQUIRE(e.code == kExitOk);
  const auto eval_dir = only_subdir(dir / "eval-runs");
  CHECK(std::filesystem::exists(eval_dir / "eval.json"));
  CHECK(std::filesystem::exists(eval_dir / "eval.txt"));

  const auto m = read_manifest(dir / "data" / "manifest.txt");
  const auto target = m.resolve(m.entries[m.indices(Split::test).front()].image);
  const auto tr = m.entries[m.indices(Split::train).front()];
  auto p = run({"predict", cfg, "--target", target.string(), "--template", m.resolve(tr.image).string(),
                "--template-labels", m.resolve(tr.labels).string(), "--out", (dir / "pred.nii").string()});
  REQUIRE(p.code == kExitOk);
  const auto pred = read_labelmap(dir / "pred.nii", 1);
  CHECK(pred.extent == Extent::cube(8));

  // A checkpoint from a different architecture is refused.
  std::ofstream(dir / "wide.cfg") << "[network]\nnum_classes = 1\nbase_channels = 4\nnum_levels = 2\n"
                                     "[data]\nmanifest = data/manifest.txt\n";
  auto bad = run({"eval", (dir / "wide.cfg").string(), "--checkpoint", (dir / "model.ckpt").string(), "--runs-dir",
                  (dir / "bad-runs").string()});
  CHECK(bad.code == kExitFailure);
}
