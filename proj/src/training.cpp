#include "priornet/training.hpp"

#include <cmath>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "priornet/errors.hpp"

namespace priornet {

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr_end > 0.0) || !(lr_start >= lr_end)) throw ConfigError("learning rates need lr_start >= lr_end > 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be > 0");
  if (!(dice_eps > 0.0)) throw ConfigError("dice_eps must be > 0");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be >= 0");
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os << std::setprecision(17) << "epochs=" << epochs << " batch_size=" << batch_size << " lr_start=" << lr_start
     << " lr_end=" << lr_end << " beta1=" << beta1 << " beta2=" << beta2 << " adam_eps=" << adam_eps
     << " seed=" << seed << " dice_eps=" << dice_eps << " grad_clip=" << grad_clip;
  return os.str();
}

double cosine_annealed_lr(std::int64_t step, std::int64_t total_steps, double lr_start, double lr_end) {
  if (total_steps < 1 || step < 0 || step > total_steps)
    throw ConfigError("cosine_annealed_lr: step " + std::to_string(step) + " outside [0, " +
                      std::to_string(total_steps) + "]");
  if (!(lr_end > 0.0) || !(lr_start >= lr_end)) throw ConfigError("cosine_annealed_lr: need lr_start >= lr_end > 0");
  if (step == 0) return lr_start;
  if (step == total_steps) return lr_end;
  if (2 * step == total_steps) return (lr_start + lr_end) / 2.0;
  const double phase = std::numbers::pi * double(step) / double(total_steps);
  return lr_end + 0.5 * (lr_start - lr_end) * (1.0 + std::cos(phase));
}

AdamState make_adam_state(const Parameters& params) { return {zeros_like(params), zeros_like(params), 0}; }

void adam_update(Parameters& params, const Parameters& grads, AdamState& state, double lr, double beta1,
                 double beta2, double eps) {
  const std::int64_t step = state.step + 1;
  for (const auto& [name, p] : params) {
    auto g = grads.find(name);
    auto m = state.m.find(name);
    auto v = state.v.find(name);
    if (g == grads.end() || m == state.m.end() || v == state.v.end() || g->second.size() != p.size() ||
        m->second.size() != p.size() || v->second.size() != p.size())
      throw ShapeError("adam_update: gradient or moment for '" + name + "' missing or misshapen");
    for (double x : g->second.values)
      if (!std::isfinite(x))
        throw NumericError("non-finite gradient in '" + name + "' at step " + std::to_string(step));
  }
  if (grads.size() != params.size()) throw ShapeError("adam_update: gradients name parameters the model lacks");

  const double c1 = 1.0 - std::pow(beta1, double(step));
  const double c2 = 1.0 - std::pow(beta2, double(step));
  for (auto& [name, p] : params) {
    const auto& g = grads.at(name).values;
    auto& m = state.m.at(name).values;
    auto& v = state.v.at(name).values;
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p.values[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
  state.step = step;
}

int steps_per_epoch(std::size_t train_count, int batch_size) {
  return int((train_count + std::size_t(batch_size) - 1) / std::size_t(batch_size));
}

StepOutcome compute_step(const std::vector<TrainingPair>& batch, const Parameters& params, const NetworkConfig& net,
                         double dice_eps) {
  const Network<float> model(net);
  const auto table = cast_parameters<float>(params);
  std::vector<NetworkTrace<float>> traces(batch.size());
  std::vector<Tensor<float>> logits, targets;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& pair = batch[b];
    const auto x = image_branch_input<float>(pair.target.image, &pair.bundle, net);
    std::optional<Tensor<float>> templ;
    if (net.has_template_encoder()) templ = template_tensor<float>(pair.bundle);
    logits.push_back(model.forward(x, templ ? &*templ : nullptr, table, &traces[b]));
    targets.push_back(one_hot_encode<float>(pair.target.labels));
  }
  const auto loss = soft_dice_loss<float>(logits, targets, dice_eps);
  auto grads = zero_table<float>(params);
  for (std::size_t b = 0; b < batch.size(); ++b) model.backward(traces[b], loss.grads[b], table, grads);
  StepOutcome out{loss.loss, zeros_like(params)};
  accumulate(grads, out.grads);
  return out;
}

void write_config_header(std::ostream& out, const TrainConfig& cfg, const NetworkConfig& net) {
  auto echo = [&out](const std::string& section, const std::string& canonical) {
    std::istringstream in(canonical);
    for (std::string kv; in >> kv;) {
      const auto eq = kv.find('=');
      out << "# " << section << "." << kv.substr(0, eq) << " " << kv.substr(eq + 1) << "\n";
    }
  };
  echo("network", net.canonical());
  echo("train", cfg.canonical());
}

namespace {

void clip_global_norm(Parameters& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [_, g] : grads)
    for (double x : g.values) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double scale = max_norm / norm;
  for (auto& [_, g] : grads)
    for (double& x : g.values) x *= scale;
}

constexpr std::uint64_t kSamplerStream = 0x5A4D504C;

}  // namespace

TrainResult train_loop(const DatasetCache& data, const TrainConfig& cfg, const NetworkConfig& net,
                       const TrainOptions& opts) {
  cfg.validate();
  net.validate();
  const auto& manifest = data.manifest();
  if (manifest.num_classes != net.num_classes)
    throw ConfigError("network expects " + std::to_string(net.num_classes) + " classes, data has " +
                      std::to_string(manifest.num_classes));
  if (net.dimensionality > manifest.dimensionality)
    throw ConfigError("a 3D network cannot train on 2D data");
  const auto train = manifest.indices(Split::train);
  if (train.empty()) throw DataError("the train split is empty");

  const int spe = steps_per_epoch(train.size(), cfg.batch_size);
  const std::int64_t total = std::int64_t(cfg.epochs) * spe;

  TrainResult result;
  Checkpoint& ck = result.checkpoint;
  rng::Engine engine;
  if (opts.resume) {
    check_compatible(*opts.resume, net);
    if (opts.resume->train.canonical() != cfg.canonical())
      throw CompatibilityError("checkpoint was trained with '" + opts.resume->train.canonical() +
                               "', current config is '" + cfg.canonical() + "'");
    ck = *opts.resume;
    rng::load_state(engine, ck.rng_state);
  } else {
    ck.network = net;
    ck.train = cfg;
    ck.params = init_parameters(net);
    ck.adam = make_adam_state(ck.params);
    engine.seed(rng::derive_seed(cfg.seed, kSamplerStream));
    ck.rng_state = rng::save_state(engine);
  }
  ck.train.checkpoint = cfg.checkpoint;

  std::ostream* log = opts.log;
  if (log) {
    write_config_header(*log, cfg, net);
    *log << "# steps_per_epoch " << spe << "\n";
    if (opts.resume) *log << "# resumed_after_epoch " << ck.epoch << "\n";
  }

  for (int epoch = ck.epoch + 1; epoch <= cfg.epochs; ++epoch) {
    double sum = 0.0;
    for (int s = 0; s < spe; ++s) {
      const std::int64_t step = ck.adam.step;
      const double lr = cosine_annealed_lr(step, total, cfg.lr_start, cfg.lr_end);
      std::vector<TrainingPair> batch;
      for (int b = 0; b < cfg.batch_size; ++b) batch.push_back(sample_training_pair(data, net.dimensionality, engine));
      auto outcome = compute_step(batch, ck.params, net, cfg.dice_eps);
      if (!std::isfinite(outcome.loss))
        throw NumericError("loss became non-finite at epoch " + std::to_string(epoch) + " step " +
                           std::to_string(step + 1));
      if (cfg.grad_clip > 0.0) clip_global_norm(outcome.grads, cfg.grad_clip);
      adam_update(ck.params, outcome.grads, ck.adam, lr, cfg.beta1, cfg.beta2, cfg.adam_eps);
      sum += outcome.loss;
      result.step_losses.push_back(outcome.loss);
      if (log)
        *log << "epoch " << epoch << " step " << ck.adam.step << " lr " << std::setprecision(10) << lr << " loss "
             << outcome.loss << "\n";
    }
    ck.epoch = epoch;
    ck.epoch_losses.push_back(sum / spe);
    ck.rng_state = rng::save_state(engine);
    if (log) *log << "epoch " << epoch << " mean_loss " << std::setprecision(10) << ck.epoch_losses.back() << std::endl;
    if (opts.on_epoch) opts.on_epoch(ck);
    if (opts.stop_after_epoch && epoch >= *opts.stop_after_epoch) break;
  }

  if (!cfg.checkpoint.empty() && ck.epoch == cfg.epochs) save_checkpoint(cfg.checkpoint, ck);
  return result;
}

}  // namespace priornet
