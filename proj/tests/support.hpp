#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

#include "priornet/network.hpp"
#include "priornet/random.hpp"
#include "priornet/volume.hpp"

// Hand-rolled generators for the property tests.
namespace testing {

using priornet::Extent;
using priornet::rng::Engine;

inline priornet::Tensor<double> random_tensor(Engine& e, int channels, const Extent& extent, double scale = 1.0) {
  priornet::Tensor<double> t(channels, extent);
  for (double& v : t.data()) v = scale * priornet::rng::normal(e);
  return t;
}

inline priornet::Volume random_volume(Engine& e, const Extent& extent) {
  priornet::Volume v(extent);
  for (float& x : v.data) x = float(priornet::rng::normal(e));
  return v;
}

inline priornet::LabelMap random_labels(Engine& e, const Extent& extent, int k) {
  priornet::LabelMap l(extent, k);
  for (auto& x : l.data) x = int(priornet::rng::index(e, std::size_t(k + 1)));
  return l;
}

inline Extent random_extent(Engine& e, int lo, int hi, int ndim = 3) {
  auto n = [&] { return lo + int(priornet::rng::index(e, std::size_t(hi - lo + 1))); };
  return ndim == 3 ? Extent::from_dims({n(), n(), n()}) : Extent::from_dims({n(), n()});
}

// A scratch directory removed when the object goes out of scope.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("priornet-test-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
