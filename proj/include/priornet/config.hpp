#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "priornet/dataset.hpp"
#include "priornet/network.hpp"
#include "priornet/training.hpp"

namespace priornet {

// [data]
struct DataConfig {
  std::string manifest;  // relative paths resolve against the config file
  std::optional<std::vector<int>> crop;
  std::optional<std::pair<double, double>> truncate;
  bool zscore = false;
  // Re-split the manifest on load when either is set.
  std::optional<std::size_t> test_count;
  std::optional<double> test_fraction;
  std::uint64_t split_seed = 0;

  Preprocessing preprocessing() const;
};

// [eval]
struct EvalConfig {
  std::uint64_t template_seed = 0;
  std::vector<std::uint64_t> ablation_seeds{0, 1, 2};
  std::uint64_t robustness_seed = 0;
};

// Parsed experiment file. Grammar: "key = value" lines under [network],
// [train], [data], [eval] or [synthetic] headers; '#' starts a comment;
// lists are comma-separated. Every key is optional, and the defaults are
// the ones in the structs (network and training follow the paper regime).
struct RunConfig {
  NetworkConfig network;
  TrainConfig train;
  DataConfig data;
  EvalConfig eval;
  SyntheticSpec synthetic;
  std::string synthetic_format = "pvol";  // or "nifti"
  std::filesystem::path base_dir;         // directory of the config file

  std::filesystem::path manifest_path() const;
  // The resolved configuration in the input grammar; parse_config_text of
  // the result gives back the same RunConfig.
  std::string to_text() const;
};

// Throws ConfigError naming the line for syntax errors, unknown sections or
// keys, and malformed values.
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
RunConfig parse_config(const std::filesystem::path& path);

// Loads the manifest named in [data], applies any requested re-split and
// the preprocessing, and checks the class count against [network].
DatasetCache load_data(const RunConfig& cfg);

}  // namespace priornet
