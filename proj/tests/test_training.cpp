#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "priornet/training.hpp"
#include "support.hpp"

using namespace priornet;
using testing::Engine;

namespace {

NetworkConfig small_net(Variant v = Variant::priornet) {
  NetworkConfig cfg;
  cfg.variant = v;
  cfg.num_classes = 2;
  cfg.base_channels = 2;
  cfg.num_levels = 2;
  cfg.seed = 3;
  return cfg;
}

TrainConfig small_train(int epochs = 3) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 2;
  t.seed = 11;
  return t;
}

// Five 8^3 volumes; shared by the tests in this file.
const DatasetCache& small_data() {
  static testing::TempDir dir("train");
  static const DatasetCache cache = [] {
    SyntheticSpec s;
    s.num_volumes = 5;
    s.shape = {8, 8, 8};
    s.num_classes = 2;
    s.radius_min = 1.0;
    s.radius_max = 1.5;
    s.position_jitter = 0.5;
    s.seed = 2;
    return DatasetCache(generate_synthetic_dataset(s, dir.path()));
  }();
  return cache;
}

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Parameters single(double value) { return {{"w", ParamArray{{1}, {value}}}}; }

}  // namespace

TEST_CASE("cosine schedule hits its endpoints and only decreases") {
  CHECK(cosine_annealed_lr(0, 100, 0.02, 1e-6) == 0.02);
  CHECK(cosine_annealed_lr(100, 100, 0.02, 1e-6) == 1e-6);
  CHECK(cosine_annealed_lr(50, 100, 0.02, 1e-6) == (0.02 + 1e-6) / 2);
  double prev = 1.0;
  for (int s = 0; s <= 137; ++s) {
    const double lr = cosine_annealed_lr(s, 137, 0.02, 1e-6);
    CHECK(lr <= prev);
    CHECK(lr >= 1e-6);
    prev = lr;
  }
  CHECK(cosine_annealed_lr(3, 7, 0.5, 0.5) == 0.5);
  CHECK_THROWS_AS(cosine_annealed_lr(8, 7, 0.02, 1e-6), ConfigError);
  CHECK_THROWS_AS(cosine_annealed_lr(0, 0, 0.02, 1e-6), ConfigError);
  CHECK_THROWS_AS(cosine_annealed_lr(1, 7, 1e-6, 0.02), ConfigError);
}

TEST_CASE("the first Adam step moves by lr times the gradient sign") {
  // After one step the bias-corrected moments are g and g^2 exactly, so the
  // update is -lr * g / (|g| + eps).
  auto p = single(0.5);
  auto state = make_adam_state(p);
  adam_update(p, single(1.0), state, 0.1, 0.9, 0.999, 1e-8);
  CHECK(p.at("w").values[0] == doctest::Approx(0.5 - 0.1 / (1.0 + 1e-8)).epsilon(1e-15));
  CHECK(state.step == 1);
  adam_update(p, single(-4.0), state, 0.1, 0.9, 0.999, 1e-8);
  // m = 0.09 - 0.4 = -0.31 -> /0.19; v = 0.000999 + 0.016 -> /0.001999
  const double mh = -0.31 / 0.19, vh = (0.999 * 0.001 + 0.001 * 16.0) / (1.0 - 0.999 * 0.999);
  CHECK(p.at("w").values[0] == doctest::Approx(0.5 - 0.1 / (1.0 + 1e-8) - 0.1 * mh / (std::sqrt(vh) + 1e-8)));
}

TEST_CASE("zero gradients leave parameters alone, bad ones are refused") {
  auto p = single(0.25);
  auto state = make_adam_state(p);
  adam_update(p, single(0.0), state, 0.1, 0.9, 0.999, 1e-8);
  CHECK(p.at("w").values[0] == 0.25);
  const auto before = p;
  const auto before_state = state.step;
  try {
    adam_update(p, single(std::nan("")), state, 0.1, 0.9, 0.999, 1e-8);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("'w'") != std::string::npos);
    CHECK(std::string(e.what()).find("step 2") != std::string::npos);
  }
  CHECK(p == before);
  CHECK(state.step == before_state);
  CHECK_THROWS_AS(adam_update(p, Parameters{}, state, 0.1, 0.9, 0.999, 1e-8), ShapeError);
}

TEST_CASE("every layer group receives gradient") {
  Engine eng(81);
  for (Variant v : all_variants()) {
    const auto net = small_net(v);
    const auto params = init_parameters(net);
    std::vector<TrainingPair> batch{sample_training_pair(small_data(), 3, eng), sample_training_pair(small_data(), 3, eng)};
    const auto out = compute_step(batch, params, net, kDiceSmoothing);
    CHECK(std::isfinite(out.loss));
    std::map<std::string, double> group_norm;
    for (const auto& [name, g] : out.grads)
      for (double x : g.values) group_norm[layer_group(name)] += x * x;
    for (const auto& [group, norm] : group_norm) {
      CAPTURE(group);
      CHECK(norm > 0.0);
    }
    CHECK(group_norm.count("template_encoder") == std::size_t(net.has_template_encoder()));
  }
}

TEST_CASE("identical seeds give bit-identical logs") {
  std::ostringstream a, b, c;
  const auto net = small_net();
  train_loop(small_data(), small_train(), net, {&a});
  train_loop(small_data(), small_train(), net, {&b});
  CHECK(a.str() == b.str());
  auto other = small_train();
  other.seed = 12;
  train_loop(small_data(), other, net, {&c});
  CHECK(a.str() != c.str());
}

TEST_CASE("the log echoes the config and reports every step") {
  std::ostringstream log;
  const auto net = small_net();
  const auto r = train_loop(small_data(), small_train(2), net, {&log});
  const std::string s = log.str();
  CHECK(s.starts_with("# network."));
  CHECK(s.find("# train.epochs 2\n") != std::string::npos);
  CHECK(s.find("# steps_per_epoch 3\n") != std::string::npos);
  CHECK(s.find("epoch 1 step 1 lr 0.02 loss ") != std::string::npos);
  CHECK(s.find("epoch 2 mean_loss ") != std::string::npos);
  CHECK(r.step_losses.size() == 6);
  CHECK(r.checkpoint.epoch == 2);
  CHECK(r.checkpoint.adam.step == 6);
  CHECK(r.checkpoint.epoch_losses.size() == 2);
}

TEST_CASE("zero epochs returns the initial parameters") {
  const auto net = small_net();
  const auto r = train_loop(small_data(), small_train(0), net);
  CHECK(r.checkpoint.params == init_parameters(net));
  CHECK(r.step_losses.empty());
}

TEST_CASE("training on the wrong data is refused") {
  auto net = small_net();
  net.num_classes = 3;
  CHECK_THROWS_AS(train_loop(small_data(), small_train(), net), ConfigError);
}

TEST_CASE("checkpoints survive save, load, save byte for byte") {
  testing::TempDir dir("train");
  const auto net = small_net();
  const auto r = train_loop(small_data(), small_train(2), net);
  save_checkpoint(dir / "a.ckpt", r.checkpoint);
  const auto back = load_checkpoint(dir / "a.ckpt", &net);
  save_checkpoint(dir / "b.ckpt", back);
  CHECK(file_bytes(dir / "a.ckpt") == file_bytes(dir / "b.ckpt"));
  CHECK(back.params == r.checkpoint.params);
  CHECK(back.adam.m == r.checkpoint.adam.m);
  CHECK(back.epoch_losses == r.checkpoint.epoch_losses);
  CHECK(back.train.canonical() == r.checkpoint.train.canonical());

  const std::string bytes = file_bytes(dir / "a.ckpt");
  std::ofstream(dir / "cut.ckpt", std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(load_checkpoint(dir / "cut.ckpt"), FormatError);

  std::string versioned = bytes;
  versioned[8] = char(kCheckpointVersion + 1);
  std::ofstream(dir / "ver.ckpt", std::ios::binary) << versioned;
  CHECK_THROWS_AS(load_checkpoint(dir / "ver.ckpt"), CompatibilityError);

  std::ofstream(dir / "junk.ckpt", std::ios::binary) << "not a checkpoint at all";
  CHECK_THROWS_AS(load_checkpoint(dir / "junk.ckpt"), FormatError);

  auto wider = net;
  wider.base_channels = 4;
  CHECK_THROWS_AS(load_checkpoint(dir / "a.ckpt", &wider), CompatibilityError);
  auto reseeded = net;
  reseeded.seed = 99;
  CHECK_NOTHROW(load_checkpoint(dir / "a.ckpt", &reseeded));
}

TEST_CASE("resuming matches the uninterrupted run bit for bit") {
  testing::TempDir dir("train");
  const auto net = small_net();
  const auto cfg = small_train(4);
  std::ostringstream full_log;
  const auto full = train_loop(small_data(), cfg, net, {&full_log});

  TrainOptions first;
  first.stop_after_epoch = 2;
  const auto half = train_loop(small_data(), cfg, net, first);
  CHECK(half.checkpoint.epoch == 2);
  save_checkpoint(dir / "half.ckpt", half.checkpoint);
  const auto loaded = load_checkpoint(dir / "half.ckpt", &net);

  TrainOptions second;
  second.resume = &loaded;
  std::ostringstream resumed_log;
  second.log = &resumed_log;
  const auto rest = train_loop(small_data(), cfg, net, second);
  CHECK(rest.checkpoint.params == full.checkpoint.params);
  CHECK(rest.checkpoint.adam.v == full.checkpoint.adam.v);
  CHECK(rest.checkpoint.epoch_losses == full.checkpoint.epoch_losses);
  CHECK(rest.checkpoint.rng_state == full.checkpoint.rng_state);

  // The per-step lines of epochs 3 and 4 are the same text.
  auto tail = [](const std::string& s) { return s.substr(s.find("epoch 3 step")); };
  CHECK(tail(resumed_log.str()) == tail(full_log.str()));
  CHECK(resumed_log.str().find("# resumed_after_epoch 2") != std::string::npos);

  auto changed = cfg;
  changed.lr_start = 0.01;
  TrainOptions bad;
  bad.resume = &loaded;
  CHECK_THROWS_AS(train_loop(small_data(), changed, net, bad), CompatibilityError);
}

TEST_CASE("the checkpoint is written after the last epoch") {
  testing::TempDir dir("train");
  auto cfg = small_train(1);
  cfg.checkpoint = (dir / "final.ckpt").string();
  const auto net = small_net();
  const auto r = train_loop(small_data(), cfg, net);
  REQUIRE(std::filesystem::exists(dir / "final.ckpt"));
  CHECK(load_checkpoint(dir / "final.ckpt").params == r.checkpoint.params);
}

TEST_CASE("training lowers the loss") {
  const auto net = small_net();
  const auto r = train_loop(small_data(), small_train(15), net);
  CHECK(r.checkpoint.epoch_losses.back() < r.checkpoint.epoch_losses.front());
}
