#include "priornet/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include "priornet/io.hpp"

namespace priornet {

std::string to_string(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "test") return Split::test;
  throw FormatError("unknown split tag '" + s + "' (expected train or test)");
}

std::vector<std::size_t> DatasetManifest::indices(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entries.size(); ++i)
    if (entries[i].split == s) out.push_back(i);
  return out;
}

std::filesystem::path DatasetManifest::resolve(const std::string& p) const {
  std::filesystem::path path(p);
  return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
}

void DatasetManifest::validate() const {
  if (num_classes < 1) throw DataError("manifest: num_classes must be >= 1");
  if (dimensionality != 2 && dimensionality != 3) throw DataError("manifest: dimensionality must be 2 or 3");
  std::set<std::string> seen;
  for (const auto& e : entries) {
    if (e.image.empty() || e.labels.empty()) throw DataError("manifest: entry without image or label path");
    if (!seen.insert(e.image).second || !seen.insert(e.labels).second)
      throw DataError("manifest: path listed twice ('" + e.image + "' / '" + e.labels + "')");
  }
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest '" + path.string() + "'");
  DatasetManifest m;
  m.base_dir = path.parent_path();
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string key;
      int value = 0;
      if (meta >> key >> value) {
        if (key == "num_classes") m.num_classes = value;
        if (key == "dimensionality") m.dimensionality = value;
      }
      continue;
    }
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (std::size_t tab; (tab = line.find('\t', start)) != std::string::npos; start = tab + 1)
      fields.push_back(line.substr(start, tab - start));
    fields.push_back(line.substr(start));
    if (fields.size() != 3)
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 3 tab-separated fields");
    m.entries.push_back({fields[0], fields[1], parse_split(fields[2])});
  }
  m.validate();
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  manifest.validate();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest '" + path.string() + "'");
  out << "# num_classes " << manifest.num_classes << "\n";
  out << "# dimensionality " << manifest.dimensionality << "\n";
  for (const auto& e : manifest.entries) out << e.image << "\t" << e.labels << "\t" << to_string(e.split) << "\n";
}

DatasetManifest split_dataset(const DatasetManifest& manifest, const SplitRequest& request, std::uint64_t seed) {
  const std::size_t n = manifest.entries.size();
  std::size_t test = 0;
  if (request.test_count) {
    test = *request.test_count;
  } else {
    if (request.test_fraction < 0.0 || request.test_fraction > 1.0)
      throw ConfigError("test_fraction must lie in [0, 1]");
    test = std::size_t(std::llround(request.test_fraction * double(n)));
  }
  if (test > n)
    throw ConfigError("cannot hold out " + std::to_string(test) + " test entries from " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng::Engine engine(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng::index(engine, i)]);
  DatasetManifest out = manifest;
  for (auto& e : out.entries) e.split = Split::train;
  for (std::size_t i = 0; i < test; ++i) out.entries[order[i]].split = Split::test;
  return out;
}

void SyntheticSpec::validate() const {
  if (num_volumes < 1) throw ConfigError("synthetic: num_volumes must be >= 1");
  if (num_classes < 1) throw ConfigError("synthetic: num_classes must be >= 1");
  Extent::from_dims(shape);
  if (!class_means.empty() && class_means.size() != std::size_t(num_classes))
    throw ConfigError("synthetic: class_means needs one value per class");
  if (!class_stds.empty() && class_stds.size() != std::size_t(num_classes))
    throw ConfigError("synthetic: class_stds needs one value per class");
  if (!(radius_min > 0.0) || radius_max < radius_min) throw ConfigError("synthetic: invalid blob radius range");
  if (position_jitter < 0.0 || noise_std < 0.0 || background_std < 0.0 || distractors < 0)
    throw ConfigError("synthetic: jitter, noise and distractor settings must be non-negative");
  if (max_attempts < 1) throw ConfigError("synthetic: max_attempts must be >= 1");
}

double SyntheticSpec::class_mean(int c) const {
  return class_means.empty() ? double(c) : class_means[std::size_t(c - 1)];
}

double SyntheticSpec::class_std(int c) const { return class_stds.empty() ? 0.1 : class_stds[std::size_t(c - 1)]; }

namespace {

struct Blob {
  std::array<double, 3> center{};
  std::array<double, 3> radius{};
  int label = 0;       // 0 for distractors
  int appearance = 0;  // class whose intensity distribution fills the blob

  double reach() const { return std::max({radius[0], radius[1], radius[2]}); }
  bool contains(double i, double j, double k, int ndim) const {
    double s = 0.0;
    const double p[3] = {i, j, k};
    for (int a = 0; a < ndim; ++a) {
      const double t = (p[a] - center[std::size_t(a)]) / radius[std::size_t(a)];
      s += t * t;
    }
    return s <= 1.0;
  }
};

bool separated(const Blob& a, const Blob& b, int ndim) {
  double d2 = 0.0;
  for (int x = 0; x < ndim; ++x) {
    const double t = a.center[std::size_t(x)] - b.center[std::size_t(x)];
    d2 += t * t;
  }
  return std::sqrt(d2) > a.reach() + b.reach() + 1.0;
}

bool inside(const Blob& b, const std::vector<int>& dims) {
  for (std::size_t a = 0; a < dims.size(); ++a)
    if (b.center[a] - b.radius[a] < 0.0 || b.center[a] + b.radius[a] > double(dims[a] - 1)) return false;
  return true;
}

std::array<double, 3> canonical_center(const SyntheticSpec& spec, int c) {
  const auto& s = spec.shape;
  std::array<double, 3> center{(s[0] - 1) / 2.0, (s[1] - 1) / 2.0, s.size() == 3 ? (s[2] - 1) / 2.0 : 0.0};
  if (spec.num_classes == 1) return center;
  const double ring = 0.25 * double(std::min(s[0], s[1]));
  const double angle = 2.0 * std::numbers::pi * double(c - 1) / double(spec.num_classes);
  center[0] += ring * std::cos(angle);
  center[1] += ring * std::sin(angle);
  return center;
}

std::vector<Blob> place_blobs(const SyntheticSpec& spec, rng::Engine& engine) {
  const int ndim = int(spec.shape.size());
  for (int attempt = 0; attempt < spec.max_attempts; ++attempt) {
    std::vector<Blob> blobs;
    bool ok = true;
    for (int c = 1; c <= spec.num_classes && ok; ++c) {
      Blob b;
      b.label = c;
      b.appearance = c;
      const auto base = canonical_center(spec, c);
      for (int a = 0; a < ndim; ++a) {
        b.center[std::size_t(a)] = base[std::size_t(a)] + rng::uniform(engine, -spec.position_jitter, spec.position_jitter);
        b.radius[std::size_t(a)] = rng::uniform(engine, spec.radius_min, spec.radius_max);
      }
      ok = inside(b, spec.shape) &&
           std::all_of(blobs.begin(), blobs.end(), [&](const Blob& o) { return separated(b, o, ndim); });
      blobs.push_back(b);
    }
    for (int d = 0; d < spec.distractors && ok; ++d) {
      Blob b;
      b.appearance = 1 + int(rng::index(engine, std::size_t(spec.num_classes)));
      for (int a = 0; a < ndim; ++a) {
        b.radius[std::size_t(a)] = rng::uniform(engine, spec.radius_min, spec.radius_max);
        const double lo = b.radius[std::size_t(a)], hi = spec.shape[std::size_t(a)] - 1 - b.radius[std::size_t(a)];
        b.center[std::size_t(a)] = lo < hi ? rng::uniform(engine, lo, hi) : (lo + hi) / 2.0;
      }
      ok = inside(b, spec.shape) &&
           std::all_of(blobs.begin(), blobs.end(), [&](const Blob& o) { return separated(b, o, ndim); });
      blobs.push_back(b);
    }
    if (ok) return blobs;
  }
  throw GenerationError("synthetic: could not place " + std::to_string(spec.num_classes + spec.distractors) +
                        " non-overlapping blobs in " + std::to_string(spec.max_attempts) + " attempts");
}

std::string numbered(const std::string& stem, std::size_t index, const std::string& ext) {
  std::ostringstream os;
  os << stem << "_" << std::setw(3) << std::setfill('0') << index << ext;
  return os.str();
}

}  // namespace

SyntheticCase synthesize_case(const SyntheticSpec& spec, std::size_t index) {
  spec.validate();
  rng::Engine engine(rng::derive_seed(spec.seed, index));
  const auto blobs = place_blobs(spec, engine);
  const Extent e = Extent::from_dims(spec.shape);
  SyntheticCase out{Volume(e), LabelMap(e, spec.num_classes)};
  for (int i = 0; i < e.h; ++i)
    for (int j = 0; j < e.w; ++j)
      for (int k = 0; k < e.d; ++k) {
        int appearance = 0, label = 0;
        for (const auto& b : blobs)
          if (b.contains(i, j, k, e.ndim)) {
            appearance = b.appearance;
            label = b.label;
            break;
          }
        double v = appearance == 0 ? rng::normal(engine, spec.background_mean, spec.background_std)
                                   : rng::normal(engine, spec.class_mean(appearance), spec.class_std(appearance));
        v += rng::normal(engine, 0.0, spec.noise_std);
        out.image(i, j, k) = float(v);
        out.labels(i, j, k) = label;
      }
  return out;
}

DatasetManifest generate_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
  spec.validate();
  std::filesystem::create_directories(out_dir);
  DatasetManifest m;
  m.num_classes = spec.num_classes;
  m.dimensionality = int(spec.shape.size());
  m.base_dir = out_dir;
  for (int n = 0; n < spec.num_volumes; ++n) {
    const auto c = synthesize_case(spec, std::size_t(n));
    ManifestEntry entry{numbered("image", std::size_t(n), spec.extension),
                        numbered("labels", std::size_t(n), spec.extension), Split::train};
    write_volume(out_dir / entry.image, c.image);
    write_labelmap(out_dir / entry.labels, c.labels);
    m.entries.push_back(entry);
  }
  write_manifest(out_dir / "manifest.txt", m);
  return m;
}

Volume Preprocessing::apply(const Volume& v) const {
  Volume out = crop ? center_crop(v, *crop) : v;
  if (truncate) out = truncate_intensity(out, truncate->first, truncate->second);
  if (zscore) out = normalize_zscore(out);
  return out;
}

LabelMap Preprocessing::apply(const LabelMap& labels) const { return crop ? center_crop(labels, *crop) : labels; }

DatasetCache::DatasetCache(DatasetManifest manifest, Preprocessing prep) : manifest_(std::move(manifest)) {
  manifest_.validate();
  for (const auto& e : manifest_.entries) {
    Sample s{prep.apply(read_volume(manifest_.resolve(e.image))),
             prep.apply(read_labelmap(manifest_.resolve(e.labels), manifest_.num_classes))};
    if (!(s.image.extent == s.labels.extent))
      throw DataError("'" + e.image + "' and '" + e.labels + "' differ in shape");
    std::vector<int> slices;
    if (s.labels.extent.ndim == 3)
      for (int k = 0; k < s.labels.extent.d; ++k) {
        bool any = false;
        for (int i = 0; i < s.labels.extent.h && !any; ++i)
          for (int j = 0; j < s.labels.extent.w && !any; ++j) any = s.labels(i, j, k) != 0;
        if (any) slices.push_back(k);
      }
    samples_.push_back(std::move(s));
    fg_slices_.push_back(std::move(slices));
  }
}

TemplateBundle make_bundle(const Sample& s) { return extract_foreground_regions(s.image, s.labels); }

TrainingPair sample_training_pair(const DatasetCache& data, int network_dimensionality, rng::Engine& engine) {
  const auto train = data.manifest().indices(Split::train);
  if (train.empty()) throw DataError("sample_training_pair: the train split is empty");
  TrainingPair pair;
  const std::size_t t = rng::index(engine, train.size());
  std::size_t m = t;
  if (train.size() > 1) {
    m = rng::index(engine, train.size() - 1);
    if (m >= t) ++m;
  }
  pair.target_index = train[t];
  pair.template_index = train[m];
  const Sample& target = data.at(pair.target_index);
  const Sample& templ = data.at(pair.template_index);

  const bool slice_mode = network_dimensionality == 2 && target.image.extent.ndim == 3;
  if (!slice_mode) {
    pair.target = target;
    pair.bundle = make_bundle(templ);
    return pair;
  }

  auto pick_slice = [&](std::size_t index, int exclude) {
    std::vector<int> candidates = data.foreground_slices(index);
    if (candidates.empty())
      for (int k = 0; k < data.at(index).image.extent.d; ++k) candidates.push_back(k);
    if (exclude >= 0 && candidates.size() > 1) std::erase(candidates, exclude);
    return candidates[rng::index(engine, candidates.size())];
  };
  pair.target_slice = pick_slice(pair.target_index, -1);
  pair.template_slice = pick_slice(pair.template_index, pair.template_index == pair.target_index ? pair.target_slice : -1);
  pair.target = {axial_slice(target.image, pair.target_slice), axial_slice(target.labels, pair.target_slice)};
  pair.bundle = extract_foreground_regions(axial_slice(templ.image, pair.template_slice),
                                           axial_slice(templ.labels, pair.template_slice));
  return pair;
}

}  // namespace priornet
