#include "priornet/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "priornet/errors.hpp"

namespace priornet {

namespace {

constexpr std::uint64_t kTemplateStream = 0x54454D50;

LabelMap argmax_labels(const Tensor<float>& logits, const Extent& e, int num_classes) {
  LabelMap out(e, num_classes);
  const std::size_t n = e.voxels();
  for (std::size_t v = 0; v < n; ++v) {
    int best = 0;
    float best_value = logits.at(0, v);
    for (int c = 1; c < logits.channels(); ++c)
      if (logits.at(c, v) > best_value) {
        best = c;
        best_value = logits.at(c, v);
      }
    out.data[v] = best;
  }
  return out;
}

LabelMap predict_grid(const Volume& target, const TemplateBundle& bundle, const Network<float>& model,
                      const ParamTable<float>& table) {
  const auto& cfg = model.config();
  if (cfg.has_template_encoder() || cfg.variant == Variant::single_encoder) {
    if (!(bundle.image.extent == target.extent))
      throw CompatibilityError("template grid " + bundle.image.extent.str() + " differs from target grid " +
                               target.extent.str());
    if (int(bundle.foreground.size()) != cfg.num_classes)
      throw CompatibilityError("template has " + std::to_string(bundle.foreground.size()) +
                               " foreground channels, the network expects " + std::to_string(cfg.num_classes));
  }
  const auto x = image_branch_input<float>(target, &bundle, cfg);
  std::optional<Tensor<float>> templ;
  if (cfg.has_template_encoder()) templ = template_tensor<float>(bundle);
  const auto logits = model.forward(x, templ ? &*templ : nullptr, table);
  return argmax_labels(logits, target.extent, cfg.num_classes);
}

TemplateBundle slice_bundle(const TemplateBundle& b, int k) {
  TemplateBundle out;
  out.image = axial_slice(b.image, k);
  for (const auto& f : b.foreground) out.foreground.push_back(axial_slice(f, k));
  out.labels = axial_slice(b.labels, k);
  return out;
}

std::string percent(double x) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * x;
  return os.str();
}

}  // namespace

LabelMap predict_segmentation(const Volume& target, const TemplateBundle& bundle, const Checkpoint& ckpt) {
  const NetworkConfig& cfg = ckpt.network;
  const Network<float> model(cfg);
  const auto table = cast_parameters<float>(ckpt.params);
  const int ndim = target.extent.ndim;
  if (ndim == cfg.dimensionality) {
    if (!target.extent.divisible_by(cfg.downsampling_factor()))
      throw CompatibilityError("target grid " + target.extent.str() + " is not divisible by " +
                               std::to_string(cfg.downsampling_factor()));
    return predict_grid(target, bundle, model, table);
  }
  if (cfg.dimensionality == 2 && ndim == 3) {
    LabelMap out(target.extent, cfg.num_classes);
    const int depth = target.extent.d;
    const int tdepth = bundle.image.extent.ndim == 3 ? bundle.image.extent.d : 1;
    for (int k = 0; k < depth; ++k) {
      const int tk = depth > 1 ? int(std::lround(double(k) * double(tdepth - 1) / double(depth - 1))) : 0;
      const auto pred = predict_segmentation(axial_slice(target, k), slice_bundle(bundle, tk), ckpt);
      for (int i = 0; i < target.extent.h; ++i)
        for (int j = 0; j < target.extent.w; ++j) out(i, j, k) = pred(i, j, 0);
    }
    return out;
  }
  throw CompatibilityError("a " + std::to_string(cfg.dimensionality) + "D checkpoint cannot segment a " +
                           std::to_string(ndim) + "D volume");
}

DiceReport aggregate_volumes(const std::vector<DiceReport>& per_volume) {
  if (per_volume.empty()) throw DataError("nothing to aggregate");
  const std::size_t k = per_volume.front().per_class_dice.size();
  std::vector<double> sums(k, 0.0);
  for (const auto& r : per_volume) {
    if (r.per_class_dice.size() != k) throw ShapeError("per-volume reports disagree on the class count");
    for (std::size_t c = 0; c < k; ++c) sums[c] += r.per_class_dice[c];
  }
  for (double& s : sums) s /= double(per_volume.size());
  return DiceReport::from_per_class(std::move(sums));
}

std::size_t choose_template(const DatasetManifest& manifest, std::uint64_t template_seed) {
  const auto train = manifest.indices(Split::train);
  if (train.empty()) throw DataError("no training entry to draw a template from");
  rng::Engine engine(rng::derive_seed(template_seed, kTemplateStream));
  return train[rng::index(engine, train.size())];
}

EvaluationReport evaluate_with_template(const DatasetCache& data, const Checkpoint& ckpt, std::size_t template_entry) {
  const auto& manifest = data.manifest();
  if (template_entry >= manifest.entries.size() || manifest.entries[template_entry].split != Split::train)
    throw DataError("templates must come from the train split");
  if (manifest.num_classes != ckpt.network.num_classes)
    throw CompatibilityError("checkpoint predicts " + std::to_string(ckpt.network.num_classes) +
                             " classes, data has " + std::to_string(manifest.num_classes));
  const auto test = manifest.indices(Split::test);
  if (test.empty()) throw DataError("the test split is empty");

  EvaluationReport report;
  report.template_entry = template_entry;
  const auto bundle = make_bundle(data.at(template_entry));
  std::vector<DiceReport> per_volume;
  for (std::size_t idx : test) {
    const auto& s = data.at(idx);
    const auto pred = predict_segmentation(s.image, bundle, ckpt);
    report.volumes.push_back({idx, manifest.entries[idx].image, hard_dice_score(pred, s.labels)});
    per_volume.push_back(report.volumes.back().dice);
  }
  report.aggregate = aggregate_volumes(per_volume);
  return report;
}

EvaluationReport evaluate_dataset(const DatasetCache& data, const Checkpoint& ckpt, std::uint64_t template_seed) {
  return evaluate_with_template(data, ckpt, choose_template(data.manifest(), template_seed));
}

std::string EvaluationReport::table() const {
  std::ostringstream os;
  const std::size_t k = aggregate.per_class_dice.size();
  os << std::left << std::setw(24) << "volume";
  for (std::size_t c = 1; c <= k; ++c) os << std::setw(10) << ("class" + std::to_string(c));
  os << "mean\n";
  auto row = [&](const std::string& name, const DiceReport& r) {
    os << std::setw(24) << name;
    for (double d : r.per_class_dice) os << std::setw(10) << percent(d);
    os << percent(r.mean_foreground_dice) << "\n";
  };
  for (const auto& v : volumes) row(v.image, v.dice);
  row("mean", aggregate);
  return os.str();
}

std::string EvaluationReport::json() const {
  nlohmann::json j;
  j["template_entry"] = template_entry;
  j["volumes"] = nlohmann::json::array();
  for (const auto& v : volumes)
    j["volumes"].push_back({{"entry", v.entry},
                            {"image", v.image},
                            {"per_class_dice", v.dice.per_class_dice},
                            {"mean_foreground_dice", v.dice.mean_foreground_dice}});
  j["aggregate"] = {{"per_class_dice", aggregate.per_class_dice},
                    {"mean_foreground_dice", aggregate.mean_foreground_dice}};
  return j.dump(2);
}

RobustnessReport template_robustness_study(const DatasetCache& data, const Checkpoint& ckpt, int n_templates,
                                           std::uint64_t seed) {
  auto train = data.manifest().indices(Split::train);
  if (n_templates < 1) throw ConfigError("n_templates must be >= 1");
  if (std::size_t(n_templates) > train.size())
    throw ConfigError("asked for " + std::to_string(n_templates) + " templates but the train split has " +
                      std::to_string(train.size()));
  rng::Engine engine(rng::derive_seed(seed, kTemplateStream));
  for (std::size_t i = 0; i < std::size_t(n_templates); ++i)
    std::swap(train[i], train[i + rng::index(engine, train.size() - i)]);

  RobustnessReport report;
  for (int t = 0; t < n_templates; ++t) {
    report.templates.push_back(train[std::size_t(t)]);
    report.means.push_back(evaluate_with_template(data, ckpt, train[std::size_t(t)]).aggregate.mean_foreground_dice);
  }
  const auto [lo, hi] = std::minmax_element(report.means.begin(), report.means.end());
  report.spread = *hi - *lo;
  double mean = 0.0;
  for (double m : report.means) mean += m;
  mean /= double(report.means.size());
  double var = 0.0;
  for (double m : report.means) var += (m - mean) * (m - mean);
  report.stddev = std::sqrt(var / double(report.means.size()));
  return report;
}

std::string RobustnessReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(12) << "template" << "mean dice (%)\n";
  for (std::size_t i = 0; i < templates.size(); ++i) os << std::setw(12) << templates[i] << percent(means[i]) << "\n";
  os << std::setw(12) << "spread" << percent(spread) << "\n";
  os << std::setw(12) << "stddev" << percent(stddev) << "\n";
  return os.str();
}

std::string RobustnessReport::json() const {
  nlohmann::json j;
  j["templates"] = templates;
  j["mean_foreground_dice"] = means;
  j["spread"] = spread;
  j["stddev"] = stddev;
  return j.dump(2);
}

std::string display_name(Variant v) {
  switch (v) {
    case Variant::baseline:
      return "Baseline";
    case Variant::single_encoder:
      return "Single encoder";
    case Variant::dual_encoder:
      return "Dual encoder";
    case Variant::priornet:
      return "Prior-Net";
  }
  return "?";
}

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

const AblationRow& AblationReport::row(Variant v) const {
  for (const auto& r : rows)
    if (r.variant == v) return r;
  throw DataError("ablation report has no row for " + to_string(v));
}

std::string AblationReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(18) << "Method" << "Dice (%)\n";
  for (const auto& r : rows) os << std::setw(18) << display_name(r.variant) << percent(r.median) << "\n";
  return os.str();
}

std::string AblationReport::json() const {
  nlohmann::json j;
  j["seeds"] = seeds;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"method", display_name(r.variant)},
                         {"variant", to_string(r.variant)},
                         {"seed_mean_dice", r.seed_means},
                         {"median_dice", r.median}});
  return j.dump(2);
}

AblationReport reference_ablation_table() {
  AblationReport r;
  const double published[] = {0.8310, 0.8548, 0.8658, 0.8907};
  std::size_t i = 0;
  for (Variant v : all_variants()) r.rows.push_back({v, {published[i]}, published[i++]});
  return r;
}

AblationReport ablation_study(const DatasetCache& data, const TrainConfig& train, const NetworkConfig& net,
                              const std::vector<std::uint64_t>& seeds, const AblationOptions& opts) {
  if (seeds.empty()) throw ConfigError("ablation needs at least one seed");
  if (data.manifest().indices(Split::test).empty()) throw DataError("the test split is empty");
  AblationReport report;
  report.seeds = seeds;
  for (Variant v : all_variants()) {
    AblationRow row;
    row.variant = v;
    for (std::uint64_t seed : seeds) {
      NetworkConfig n = net;
      n.variant = v;
      n.seed = seed;
      TrainConfig t = train;
      t.seed = seed;
      t.checkpoint.clear();
      TrainOptions to;
      to.log = opts.log;
      const auto trained = train_loop(data, t, n, to);
      const auto eval = evaluate_dataset(data, trained.checkpoint, opts.template_seed);
      row.seed_means.push_back(eval.aggregate.mean_foreground_dice);
      if (opts.on_run) opts.on_run(v, seed, eval, trained.checkpoint);
    }
    row.median = median(row.seed_means);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace priornet
