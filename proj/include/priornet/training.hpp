#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "priornet/dataset.hpp"
#include "priornet/network.hpp"
#include "priornet/objectives.hpp"

namespace priornet {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 2;
  double lr_start = 0.02;
  double lr_end = 1e-6;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double dice_eps = kDiceSmoothing;
  double grad_clip = 0.0;  // global-norm clipping; 0 disables
  std::string checkpoint;  // written after the last epoch when non-empty

  void validate() const;
  // Every field that shapes the optimisation trajectory, one line.
  std::string canonical() const;
};

// lr_end + (lr_start - lr_end) * (1 + cos(pi * step / total_steps)) / 2
double cosine_annealed_lr(std::int64_t step, std::int64_t total_steps, double lr_start, double lr_end);

struct AdamState {
  Parameters m, v;
  std::int64_t step = 0;  // updates applied so far
};

AdamState make_adam_state(const Parameters& params);

// One bias-corrected Adam step. Throws NumericError naming the step when a
// gradient is not finite; params and state are left untouched in that case.
void adam_update(Parameters& params, const Parameters& grads, AdamState& state, double lr, double beta1,
                 double beta2, double eps);

struct Checkpoint {
  NetworkConfig network;
  TrainConfig train;
  Parameters params;
  AdamState adam;
  int epoch = 0;  // completed epochs
  std::string rng_state;
  std::vector<double> epoch_losses;  // mean training loss per completed epoch
};

// Binary layout, all integers little-endian:
//   "PNCKPT\0\0" | u32 version | u32 record count | records...
//   record: u32 name length | name | u8 kind | payload
//     kind 0 (text):  u64 byte length | bytes
//     kind 1 (f64 array): u32 ndim | u32 dims[ndim] | f64 values[prod(dims)]
//     kind 2 (i64):  i64
// Records are written in a fixed order, so save -> load -> save is
// byte-identical.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

// Throws FormatError on a damaged file and CompatibilityError when
// `expected` is given and its fingerprint differs from the stored one.
Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected = nullptr);

// Throws CompatibilityError when the stored architecture differs from cfg
// (the init seed is not compared).
void check_compatible(const Checkpoint& ckpt, const NetworkConfig& cfg);

struct TrainOptions {
  std::ostream* log = nullptr;
  const Checkpoint* resume = nullptr;  // continue from this state
  std::optional<int> stop_after_epoch;  // pause early without changing the schedule
  std::function<void(const Checkpoint&)> on_epoch;  // called after each epoch
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> step_losses;  // this call only
};

// Gradients of the batch loss for one step, in double. Exposed so the
// gradient-flow property can be checked without running an epoch.
struct StepOutcome {
  double loss = 0.0;
  Parameters grads;
};
StepOutcome compute_step(const std::vector<TrainingPair>& batch, const Parameters& params, const NetworkConfig& net,
                         double dice_eps);

TrainResult train_loop(const DatasetCache& data, const TrainConfig& cfg, const NetworkConfig& net,
                       const TrainOptions& opts = {});

int steps_per_epoch(std::size_t train_count, int batch_size);

// Echoes both configs as "# key value" lines.
void write_config_header(std::ostream& out, const TrainConfig& cfg, const NetworkConfig& net);

}  // namespace priornet
