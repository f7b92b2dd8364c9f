#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "priornet/csam.hpp"
#include "priornet/layers.hpp"
#include "priornet/tensor.hpp"
#include "priornet/volume.hpp"

namespace priornet {

// The four models compared in the prior-knowledge ablation.
enum class Variant { baseline, single_encoder, dual_encoder, priornet };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
const std::vector<Variant>& all_variants();

enum class Normalization { instance, none };

std::string to_string(Normalization n);
Normalization parse_normalization(const std::string& s);

enum class Branch { image, template_image };

struct NetworkConfig {
  int dimensionality = 3;
  int num_classes = 3;  // K, foreground classes
  int base_channels = 16;
  int num_levels = 4;
  Variant variant = Variant::priornet;
  std::uint64_t seed = 0;
  Normalization normalization = Normalization::instance;
  Gating gating = Gating::raw;

  void validate() const;
  int downsampling_factor() const { return 1 << (num_levels - 1); }
  int channels_at(int level) const { return base_channels << level; }
  int input_channels(Branch branch) const;
  bool uses_template() const { return variant != Variant::baseline; }
  bool has_template_encoder() const { return variant == Variant::dual_encoder || variant == Variant::priornet; }
  // Stable single-line description; used for checkpoint fingerprints.
  std::string canonical() const;
};

struct ParamArray {
  std::vector<int> shape;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool operator==(const ParamArray&) const = default;
};

// Keyed by dotted layer names, e.g. "image_encoder.level0.conv1.weight".
using Parameters = std::map<std::string, ParamArray>;

// Deterministic in cfg.seed: conv weights uniform in +-sqrt(6 / fan_in),
// biases and norm shifts zero, norm scales one.
Parameters init_parameters(const NetworkConfig& cfg);
Parameters zeros_like(const Parameters& p);
std::size_t parameter_count(const Parameters& p);

// "image_encoder", "template_encoder", "fusion", "decoder" or "head".
std::string layer_group(const std::string& key);

template <typename T>
using ParamTable = std::map<std::string, std::vector<T>>;

template <typename T>
ParamTable<T> cast_parameters(const Parameters& p);

template <typename T>
ParamTable<T> zero_table(const Parameters& p);

template <typename T>
void accumulate(const ParamTable<T>& grads, Parameters& into);

template <typename T>
struct BlockTrace {
  Tensor<T> input;
  layers::NormCache<T> norm1, norm2;
  Tensor<T> hidden;
  Tensor<T> output;
};

template <typename T>
struct EncoderLevelTrace {
  std::vector<std::uint32_t> pool_argmax;
  Extent pooled_from{};
  BlockTrace<T> block;
};

template <typename T>
struct FusionTrace {
  AttentionField<T> weights;  // cosine weights (priornet)
  AttentionField<T> gate;
  Tensor<T> joined;  // concatenated features (dual encoder)
  Tensor<T> fused;   // what feeds the next level and the skip connection
};

template <typename T>
struct DecoderLevelTrace {
  Tensor<T> deep_input;
  Tensor<T> joined;
  BlockTrace<T> block;
};

template <typename T>
struct NetworkTrace {
  Tensor<T> image_input;
  std::vector<EncoderLevelTrace<T>> image_levels;
  std::vector<EncoderLevelTrace<T>> template_levels;
  std::vector<FusionTrace<T>> fusion;
  std::vector<DecoderLevelTrace<T>> decoder;
  Tensor<T> head_input;
};

// Encoder-decoder with an optional template branch. All four variants share
// this class; cfg.variant selects the input layout and the fusion rule.
template <typename T>
class Network {
 public:
  explicit Network(NetworkConfig cfg);

  const NetworkConfig& config() const { return cfg_; }

  // image_input has input_channels(image) channels; template_input is the
  // K + 1 channel template tensor and must be given iff the variant has a
  // template encoder. Returns logits with K + 1 channels.
  Tensor<T> forward(const Tensor<T>& image_input, const Tensor<T>* template_input, const ParamTable<T>& params,
                    NetworkTrace<T>* trace = nullptr) const;

  // Accumulates parameter gradients into grads; returns d(loss)/d(image_input).
  Tensor<T> backward(const NetworkTrace<T>& trace, const Tensor<T>& dlogits, const ParamTable<T>& params,
                     ParamTable<T>& grads) const;

  // Plain per-level features of one encoder branch (no fusion).
  std::vector<Tensor<T>> encode(const Tensor<T>& x, const ParamTable<T>& params, Branch branch) const;

  // skips are ordered shallow to deep: levels 0 .. num_levels - 2.
  Tensor<T> decode(const Tensor<T>& bottleneck, const std::vector<Tensor<T>>& skips,
                   const ParamTable<T>& params) const;

 private:
  NetworkConfig cfg_;
};

// Builds the image-branch input for cfg.variant: the target alone, or
// [target, template, foreground_1..K] for the single encoder.
template <typename T>
Tensor<T> image_branch_input(const Volume& target, const TemplateBundle* bundle, const NetworkConfig& cfg);

// Free-function forms over double precision.
std::vector<FeatureMap> encoder_forward(const FeatureMap& x, const Parameters& params, Branch branch,
                                        const NetworkConfig& cfg);
FeatureMap decoder_forward(const FeatureMap& bottleneck, const std::vector<FeatureMap>& skips,
                           const Parameters& params, const NetworkConfig& cfg);
FeatureMap priornet_forward(const Volume& target, const TemplateBundle& bundle, const Parameters& params,
                            const NetworkConfig& cfg);
FeatureMap variant_forward(const Volume& target, const TemplateBundle* bundle, const Parameters& params,
                           const NetworkConfig& cfg);

}  // namespace priornet
