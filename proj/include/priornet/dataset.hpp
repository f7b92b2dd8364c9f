#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "priornet/random.hpp"
#include "priornet/volume.hpp"

namespace priornet {

enum class Split { train, test };

std::string to_string(Split s);
Split parse_split(const std::string& s);

struct ManifestEntry {
  std::string image;   // as written in the manifest; relative paths resolve against base_dir
  std::string labels;
  Split split = Split::train;
};

// Text form, one entry per line:
//   <image_path>\t<label_path>\t<split>
// preceded by "# num_classes <K>" and "# dimensionality <n>" lines.
struct DatasetManifest {
  std::vector<ManifestEntry> entries;
  int num_classes = 1;
  int dimensionality = 3;
  std::filesystem::path base_dir;

  std::vector<std::size_t> indices(Split s) const;
  std::filesystem::path resolve(const std::string& p) const;
  void validate() const;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

// Either an explicit test count or a fraction of the entries (rounded to the
// nearest integer).
struct SplitRequest {
  std::optional<std::size_t> test_count;
  double test_fraction = 0.0;
};

// Deterministic in seed; entry order is kept, only the split tags change.
DatasetManifest split_dataset(const DatasetManifest& manifest, const SplitRequest& request, std::uint64_t seed);

struct SyntheticSpec {
  int num_volumes = 10;
  std::vector<int> shape{32, 32, 32};
  int num_classes = 3;
  std::vector<double> class_means;  // defaults to 1, 2, ..., K
  std::vector<double> class_stds;   // defaults to 0.1 each
  double background_mean = 0.0;
  double background_std = 0.1;
  double radius_min = 3.0;  // blob semi-axes, voxels
  double radius_max = 5.0;
  double position_jitter = 2.0;  // per-axis center jitter, voxels
  int distractors = 0;           // background blobs that copy a class appearance
  double noise_std = 0.05;       // additive white noise on every voxel
  std::uint64_t seed = 0;
  int max_attempts = 200;
  std::string extension = ".pvol";

  void validate() const;
  double class_mean(int c) const;  // c in 1..K
  double class_std(int c) const;
};

struct SyntheticCase {
  Volume image;
  LabelMap labels;
};

// One subject: K non-overlapping ellipsoids around fixed canonical centers,
// jittered in position and size. Throws GenerationError when no placement is
// found within max_attempts.
SyntheticCase synthesize_case(const SyntheticSpec& spec, std::size_t index);

// Writes image_###/labels_### files and manifest.txt into out_dir. Every
// entry is tagged train.
DatasetManifest generate_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

// Intensity preprocessing applied when volumes are loaded.
struct Preprocessing {
  std::optional<std::vector<int>> crop;
  std::optional<std::pair<double, double>> truncate;
  bool zscore = false;

  Volume apply(const Volume& v) const;
  LabelMap apply(const LabelMap& labels) const;
};

struct Sample {
  Volume image;
  LabelMap labels;
};

// Loads every manifest entry once, preprocessed.
class DatasetCache {
 public:
  DatasetCache(DatasetManifest manifest, Preprocessing prep = {});

  const DatasetManifest& manifest() const { return manifest_; }
  const Sample& at(std::size_t index) const { return samples_.at(index); }
  std::size_t size() const { return samples_.size(); }
  // Axial slice indices containing foreground (3D data only).
  const std::vector<int>& foreground_slices(std::size_t index) const { return fg_slices_.at(index); }

 private:
  DatasetManifest manifest_;
  std::vector<Sample> samples_;
  std::vector<std::vector<int>> fg_slices_;
};

struct TrainingPair {
  Sample target;
  TemplateBundle bundle;
  std::size_t target_index = 0;
  std::size_t template_index = 0;
  int target_slice = -1;  // >= 0 in 2D slice mode
  int template_slice = -1;
};

// Target and template are drawn uniformly from the train split; the
// template differs from the target whenever two or more training entries
// exist. With a 2D network over 3D data, both are axial slices containing
// foreground; a lone training volume pairs two different slices of itself.
TrainingPair sample_training_pair(const DatasetCache& data, int network_dimensionality, rng::Engine& engine);

// The template-branch bundle for training entry `index` (whole grid).
TemplateBundle make_bundle(const Sample& s);

}  // namespace priornet
