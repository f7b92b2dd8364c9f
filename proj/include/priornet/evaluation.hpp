#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "priornet/dataset.hpp"
#include "priornet/objectives.hpp"
#include "priornet/training.hpp"

namespace priornet {

// Per-voxel argmax of the logits (ties go to the lower label). A 2D network
// applied to a 3D volume predicts slice by slice, pairing each target slice
// with the template slice at the same relative depth. The bundle is ignored
// by the baseline variant.
LabelMap predict_segmentation(const Volume& target, const TemplateBundle& bundle, const Checkpoint& ckpt);

struct VolumeResult {
  std::size_t entry = 0;  // manifest index
  std::string image;
  DiceReport dice;
};

struct EvaluationReport {
  std::size_t template_entry = 0;
  std::vector<VolumeResult> volumes;  // manifest order
  DiceReport aggregate;               // per class mean over volumes, then mean over classes

  std::string table() const;
  std::string json() const;
};

// Mean over volumes for each class, then mean over classes.
DiceReport aggregate_volumes(const std::vector<DiceReport>& per_volume);

// The template is drawn from the train split with template_seed.
std::size_t choose_template(const DatasetManifest& manifest, std::uint64_t template_seed);

EvaluationReport evaluate_dataset(const DatasetCache& data, const Checkpoint& ckpt, std::uint64_t template_seed);
EvaluationReport evaluate_with_template(const DatasetCache& data, const Checkpoint& ckpt, std::size_t template_entry);

struct RobustnessReport {
  std::vector<std::size_t> templates;
  std::vector<double> means;  // mean foreground Dice per template, in [0, 1]
  double spread = 0.0;        // max - min
  double stddev = 0.0;        // population standard deviation

  std::string table() const;
  std::string json() const;
};

// n_templates distinct train entries, chosen with seed.
RobustnessReport template_robustness_study(const DatasetCache& data, const Checkpoint& ckpt, int n_templates,
                                           std::uint64_t seed);

struct AblationRow {
  Variant variant = Variant::baseline;
  std::vector<double> seed_means;  // mean foreground Dice per seed
  double median = 0.0;
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // baseline, single encoder, dual encoder, priornet

  const AblationRow& row(Variant v) const;
  std::string table() const;  // Dice (%) per variant
  std::string json() const;
};

// Display name used in the comparison table.
std::string display_name(Variant v);

// Published values for the four variants (Dice %), kept only to exercise
// table formatting; not reproducible at desk scale.
AblationReport reference_ablation_table();

double median(std::vector<double> values);

struct AblationOptions {
  std::uint64_t template_seed = 0;
  std::ostream* log = nullptr;
  // Called with (variant, seed, report) after every evaluation.
  std::function<void(Variant, std::uint64_t, const EvaluationReport&, const Checkpoint&)> on_run;
};

// Trains every variant once per seed with identical data and budget and
// evaluates each on the test split. The network and training seeds are both
// set to the run seed.
AblationReport ablation_study(const DatasetCache& data, const TrainConfig& train, const NetworkConfig& net,
                              const std::vector<std::uint64_t>& seeds, const AblationOptions& opts = {});

}  // namespace priornet
