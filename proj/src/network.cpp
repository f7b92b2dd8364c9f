#include "priornet/network.hpp"

#include <random>
#include <sstream>

namespace priornet {

namespace {

constexpr double kNormEps = 1e-5;
constexpr int kBlockKernel = 3;

enum class Kind { weight, bias, scale, shift };

struct LayerSpec {
  std::string name;
  std::vector<int> shape;
  Kind kind;
  int fan_in;
};

std::vector<int> conv_shape(int out, int in, int ksize, int ndim) {
  std::vector<int> s{out, in, ksize, ksize};
  if (ndim == 3) s.push_back(ksize);
  return s;
}

int kernel_volume(int ksize, int ndim) { return ndim == 3 ? ksize * ksize * ksize : ksize * ksize; }

std::string encoder_prefix(Branch b) { return b == Branch::image ? "image_encoder" : "template_encoder"; }

std::string level_name(const std::string& prefix, int level) { return prefix + ".level" + std::to_string(level); }

void add_conv(std::vector<LayerSpec>& out, const std::string& name, int cin, int cout, int ksize, int ndim,
              bool bias) {
  out.push_back({name + ".weight", conv_shape(cout, cin, ksize, ndim), Kind::weight, cin * kernel_volume(ksize, ndim)});
  if (bias) out.push_back({name + ".bias", {cout}, Kind::bias, 0});
}

void add_block(std::vector<LayerSpec>& out, const std::string& prefix, int cin, int cout, const NetworkConfig& cfg) {
  const bool norm = cfg.normalization == Normalization::instance;
  for (int u = 1; u <= 2; ++u) {
    const std::string id = std::to_string(u);
    add_conv(out, prefix + ".conv" + id, u == 1 ? cin : cout, cout, kBlockKernel, cfg.dimensionality, !norm);
    if (norm) {
      out.push_back({prefix + ".norm" + id + ".scale", {cout}, Kind::scale, 0});
      out.push_back({prefix + ".norm" + id + ".shift", {cout}, Kind::shift, 0});
    }
  }
}

std::vector<LayerSpec> layer_specs(const NetworkConfig& cfg) {
  std::vector<LayerSpec> specs;
  const int levels = cfg.num_levels;
  auto add_encoder = [&](Branch b) {
    int cin = cfg.input_channels(b);
    for (int l = 0; l < levels; ++l) {
      add_block(specs, level_name(encoder_prefix(b), l), cin, cfg.channels_at(l), cfg);
      cin = cfg.channels_at(l);
    }
  };
  add_encoder(Branch::image);
  if (cfg.has_template_encoder()) add_encoder(Branch::template_image);
  if (cfg.variant == Variant::dual_encoder)
    for (int l = 0; l < levels; ++l) {
      const int c = cfg.channels_at(l);
      add_conv(specs, level_name("fusion", l), 2 * c, c, 1, cfg.dimensionality, true);
    }
  for (int l = 0; l + 1 < levels; ++l) {
    const int c = cfg.channels_at(l);
    add_conv(specs, level_name("decoder", l) + ".up", cfg.channels_at(l + 1), c, 1, cfg.dimensionality, true);
    add_block(specs, level_name("decoder", l), 2 * c, c, cfg);
  }
  add_conv(specs, "head", cfg.channels_at(0), cfg.num_classes + 1, 1, cfg.dimensionality, true);
  return specs;
}

template <typename T>
const std::vector<T>& param(const ParamTable<T>& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) throw ConfigError("missing parameter '" + key + "'");
  return it->second;
}

template <typename T>
std::span<const T> param_span(const ParamTable<T>& p, const std::string& key) {
  const auto& v = param(p, key);
  return {v.data(), v.size()};
}

template <typename T>
std::span<const T> optional_span(const ParamTable<T>& p, const std::string& key) {
  auto it = p.find(key);
  if (it == p.end()) return {};
  return {it->second.data(), it->second.size()};
}

template <typename T>
std::span<T> grad_span(ParamTable<T>& g, const std::string& key) {
  auto it = g.find(key);
  if (it == g.end()) throw ConfigError("missing gradient buffer '" + key + "'");
  return {it->second.data(), it->second.size()};
}

template <typename T>
std::span<T> optional_grad(ParamTable<T>& g, const std::string& key) {
  auto it = g.find(key);
  if (it == g.end()) return {};
  return {it->second.data(), it->second.size()};
}

template <typename T>
void add_into(Tensor<T>& acc, const Tensor<T>& x) {
  if (acc.empty()) {
    acc = x;
    return;
  }
  for (std::size_t n = 0; n < acc.size(); ++n) acc.data()[n] += x.data()[n];
}

template <typename T>
class Blocks {
 public:
  Blocks(const NetworkConfig& cfg, const ParamTable<T>& p) : cfg_(cfg), p_(p) {}

  Tensor<T> forward(const std::string& prefix, const Tensor<T>& in, int cout, BlockTrace<T>& bt) const {
    bt.input = in;
    bt.hidden = unit(prefix, "1", in, cout, bt.norm1);
    bt.output = unit(prefix, "2", bt.hidden, cout, bt.norm2);
    return bt.output;
  }

  Tensor<T> backward(const std::string& prefix, const BlockTrace<T>& bt, const Tensor<T>& dout, ParamTable<T>& g,
                     bool need_dx) const {
    Tensor<T> d = unit_backward(prefix, "2", bt.hidden, bt.output, bt.norm2, dout, g, true);
    return unit_backward(prefix, "1", bt.input, bt.hidden, bt.norm1, d, g, need_dx);
  }

  Tensor<T> conv1x1(const std::string& name, const Tensor<T>& x, int cout) const {
    return layers::conv_forward(x, param_span(p_, name + ".weight"), optional_span(p_, name + ".bias"), cout, 1);
  }

  Tensor<T> conv1x1_backward(const std::string& name, const Tensor<T>& x, const Tensor<T>& dy, ParamTable<T>& g,
                             bool need_dx) const {
    return layers::conv_backward(x, param_span(p_, name + ".weight"), dy, 1, grad_span(g, name + ".weight"),
                                 optional_grad(g, name + ".bias"), need_dx);
  }

 private:
  bool normed() const { return cfg_.normalization == Normalization::instance; }

  Tensor<T> unit(const std::string& prefix, const std::string& id, const Tensor<T>& in, int cout,
                 layers::NormCache<T>& cache) const {
    const std::string conv = prefix + ".conv" + id;
    Tensor<T> z = layers::conv_forward(in, param_span(p_, conv + ".weight"), optional_span(p_, conv + ".bias"),
                                       cout, kBlockKernel);
    if (normed()) {
      const std::string norm = prefix + ".norm" + id;
      z = layers::instance_norm_forward(z, param_span(p_, norm + ".scale"), param_span(p_, norm + ".shift"),
                                        kNormEps, cache);
    }
    layers::relu_inplace(z);
    return z;
  }

  Tensor<T> unit_backward(const std::string& prefix, const std::string& id, const Tensor<T>& in,
                          const Tensor<T>& out, const layers::NormCache<T>& cache, const Tensor<T>& dout,
                          ParamTable<T>& g, bool need_dx) const {
    Tensor<T> d = layers::relu_backward(out, dout);
    if (normed()) {
      const std::string norm = prefix + ".norm" + id;
      d = layers::instance_norm_backward(d, param_span(p_, norm + ".scale"), cache, grad_span(g, norm + ".scale"),
                                         grad_span(g, norm + ".shift"));
    }
    const std::string conv = prefix + ".conv" + id;
    return layers::conv_backward(in, param_span(p_, conv + ".weight"), d, kBlockKernel,
                                 grad_span(g, conv + ".weight"), optional_grad(g, conv + ".bias"), need_dx);
  }

  const NetworkConfig& cfg_;
  const ParamTable<T>& p_;
};

template <typename T>
void check_grid(const Tensor<T>& x, const NetworkConfig& cfg, int channels, const char* what) {
  if (x.extent().ndim != cfg.dimensionality)
    throw ShapeError(std::string(what) + ": expected a " + std::to_string(cfg.dimensionality) + "D input, got " +
                     x.extent().str());
  if (x.channels() != channels)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(channels) + " input channels, got " +
                     std::to_string(x.channels()));
  if (!x.extent().divisible_by(cfg.downsampling_factor()))
    throw ShapeError(std::string(what) + ": extent " + x.extent().str() + " is not divisible by the downsampling factor " +
                     std::to_string(cfg.downsampling_factor()));
}

template <typename T>
std::vector<Tensor<T>> run_encoder(const Blocks<T>& blocks, const NetworkConfig& cfg, Branch branch,
                                   const Tensor<T>& x, std::vector<EncoderLevelTrace<T>>& traces) {
  traces.assign(std::size_t(cfg.num_levels), {});
  std::vector<Tensor<T>> out;
  for (int l = 0; l < cfg.num_levels; ++l) {
    auto& lt = traces[std::size_t(l)];
    Tensor<T> in;
    if (l == 0) {
      in = x;
    } else {
      lt.pooled_from = out.back().extent();
      in = layers::max_pool_forward(out.back(), lt.pool_argmax);
    }
    out.push_back(blocks.forward(level_name(encoder_prefix(branch), l), in, cfg.channels_at(l), lt.block));
  }
  return out;
}

template <typename T>
Tensor<T> run_decoder(const Blocks<T>& blocks, const NetworkConfig& cfg, const Tensor<T>& bottleneck,
                      const std::vector<const Tensor<T>*>& skips, std::vector<DecoderLevelTrace<T>>& traces,
                      Tensor<T>& head_input) {
  traces.assign(std::size_t(cfg.num_levels - 1), {});
  Tensor<T> x = bottleneck;
  for (int l = cfg.num_levels - 2; l >= 0; --l) {
    auto& dt = traces[std::size_t(l)];
    const std::string prefix = level_name("decoder", l);
    const Tensor<T>& skip = *skips[std::size_t(l)];
    if (x.extent().doubled() != skip.extent() || skip.channels() != cfg.channels_at(l))
      throw ShapeError("decoder: skip at level " + std::to_string(l) + " has shape " +
                       shape_string(skip.channels(), skip.extent()) + ", expected " +
                       shape_string(cfg.channels_at(l), x.extent().doubled()));
    dt.deep_input = std::move(x);
    Tensor<T> up = layers::upsample_forward(blocks.conv1x1(prefix + ".up", dt.deep_input, cfg.channels_at(l)));
    dt.joined = concat_channels(skip, up);
    x = blocks.forward(prefix, dt.joined, cfg.channels_at(l), dt.block);
  }
  head_input = x;
  return blocks.conv1x1("head", x, cfg.num_classes + 1);
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::single_encoder: return "single_encoder";
    case Variant::dual_encoder: return "dual_encoder";
    case Variant::priornet: return "priornet";
  }
  return "priornet";
}

Variant parse_variant(const std::string& s) {
  for (Variant v : all_variants())
    if (to_string(v) == s) return v;
  throw ConfigError("unknown variant '" + s + "' (expected baseline, single_encoder, dual_encoder or priornet)");
}

const std::vector<Variant>& all_variants() {
  static const std::vector<Variant> v{Variant::baseline, Variant::single_encoder, Variant::dual_encoder,
                                      Variant::priornet};
  return v;
}

std::string to_string(Normalization n) { return n == Normalization::instance ? "instance" : "none"; }

Normalization parse_normalization(const std::string& s) {
  if (s == "instance") return Normalization::instance;
  if (s == "none") return Normalization::none;
  throw ConfigError("unknown normalization '" + s + "' (expected instance or none)");
}

void NetworkConfig::validate() const {
  if (dimensionality != 2 && dimensionality != 3) throw ConfigError("dimensionality must be 2 or 3");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (base_channels < 1) throw ConfigError("base_channels must be >= 1");
  if (num_levels < 2 || num_levels > 8) throw ConfigError("num_levels must be in [2, 8]");
}

int NetworkConfig::input_channels(Branch branch) const {
  if (branch == Branch::template_image) return num_classes + 1;
  return variant == Variant::single_encoder ? num_classes + 2 : 1;
}

std::string NetworkConfig::canonical() const {
  std::ostringstream os;
  os << "dimensionality=" << dimensionality << " num_classes=" << num_classes << " base_channels=" << base_channels
     << " num_levels=" << num_levels << " variant=" << to_string(variant) << " seed=" << seed
     << " normalization=" << to_string(normalization) << " csam_gating=" << to_string(gating);
  return os.str();
}

Parameters init_parameters(const NetworkConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  auto uniform01 = [&rng] { return double(rng() >> 11) * 0x1.0p-53; };
  Parameters params;
  for (const auto& spec : layer_specs(cfg)) {
    std::size_t n = 1;
    for (int s : spec.shape) n *= std::size_t(s);
    ParamArray arr{spec.shape, std::vector<double>(n, 0.0)};
    if (spec.kind == Kind::weight) {
      const double bound = std::sqrt(6.0 / double(spec.fan_in));
      for (double& v : arr.values) v = (2.0 * uniform01() - 1.0) * bound;
    } else if (spec.kind == Kind::scale) {
      std::fill(arr.values.begin(), arr.values.end(), 1.0);
    }
    params.emplace(spec.name, std::move(arr));
  }
  return params;
}

Parameters zeros_like(const Parameters& p) {
  Parameters z;
  for (const auto& [k, v] : p) z.emplace(k, ParamArray{v.shape, std::vector<double>(v.size(), 0.0)});
  return z;
}

std::size_t parameter_count(const Parameters& p) {
  std::size_t n = 0;
  for (const auto& [k, v] : p) n += v.size();
  return n;
}

std::string layer_group(const std::string& key) { return key.substr(0, key.find('.')); }

template <typename T>
ParamTable<T> cast_parameters(const Parameters& p) {
  ParamTable<T> t;
  for (const auto& [k, v] : p) t.emplace(k, std::vector<T>(v.values.begin(), v.values.end()));
  return t;
}

template <typename T>
ParamTable<T> zero_table(const Parameters& p) {
  ParamTable<T> t;
  for (const auto& [k, v] : p) t.emplace(k, std::vector<T>(v.size(), T(0)));
  return t;
}

template <typename T>
void accumulate(const ParamTable<T>& grads, Parameters& into) {
  for (auto& [k, v] : into) {
    const auto& g = param(grads, k);
    for (std::size_t n = 0; n < v.values.size(); ++n) v.values[n] += double(g[n]);
  }
}

template <typename T>
Network<T>::Network(NetworkConfig cfg) : cfg_(cfg) {
  cfg_.validate();
}

template <typename T>
Tensor<T> Network<T>::forward(const Tensor<T>& image_input, const Tensor<T>* template_input,
                              const ParamTable<T>& params, NetworkTrace<T>* trace) const {
  check_grid(image_input, cfg_, cfg_.input_channels(Branch::image), "network input");
  if (cfg_.has_template_encoder()) {
    if (template_input == nullptr) throw ConfigError(to_string(cfg_.variant) + " needs a template input");
    check_grid(*template_input, cfg_, cfg_.input_channels(Branch::template_image), "template input");
    if (!(template_input->extent() == image_input.extent()))
      throw ShapeError("target " + image_input.extent().str() + " and template " + template_input->extent().str() +
                       " differ in shape");
  }
  NetworkTrace<T> local;
  NetworkTrace<T>& tr = trace != nullptr ? *trace : local;
  tr = NetworkTrace<T>{};
  tr.image_input = image_input;
  const Blocks<T> blocks(cfg_, params);
  const int levels = cfg_.num_levels;

  std::vector<Tensor<T>> template_features;
  if (cfg_.has_template_encoder())
    template_features = run_encoder(blocks, cfg_, Branch::template_image, *template_input, tr.template_levels);

  tr.image_levels.assign(std::size_t(levels), {});
  tr.fusion.assign(std::size_t(levels), {});
  for (int l = 0; l < levels; ++l) {
    auto& lt = tr.image_levels[std::size_t(l)];
    auto& ft = tr.fusion[std::size_t(l)];
    Tensor<T> in;
    if (l == 0) {
      in = image_input;
    } else {
      const Tensor<T>& prev = tr.fusion[std::size_t(l - 1)].fused;
      lt.pooled_from = prev.extent();
      in = layers::max_pool_forward(prev, lt.pool_argmax);
    }
    blocks.forward(level_name("image_encoder", l), in, cfg_.channels_at(l), lt.block);
    const Tensor<T>& f1 = lt.block.output;
    switch (cfg_.variant) {
      case Variant::baseline:
      case Variant::single_encoder:
        ft.fused = f1;
        break;
      case Variant::priornet:
        ft.weights = csam_weights(f1, template_features[std::size_t(l)]);
        ft.gate = csam_gate(ft.weights, cfg_.gating);
        ft.fused = csam_apply(f1, ft.gate);
        break;
      case Variant::dual_encoder:
        ft.joined = concat_channels(f1, template_features[std::size_t(l)]);
        ft.fused = blocks.conv1x1(level_name("fusion", l), ft.joined, cfg_.channels_at(l));
        break;
    }
  }

  std::vector<const Tensor<T>*> skips;
  for (int l = 0; l + 1 < levels; ++l) skips.push_back(&tr.fusion[std::size_t(l)].fused);
  return run_decoder(blocks, cfg_, tr.fusion.back().fused, skips, tr.decoder, tr.head_input);
}

template <typename T>
Tensor<T> Network<T>::backward(const NetworkTrace<T>& tr, const Tensor<T>& dlogits, const ParamTable<T>& params,
                               ParamTable<T>& grads) const {
  const Blocks<T> blocks(cfg_, params);
  const int levels = cfg_.num_levels;
  std::vector<Tensor<T>> dfused(static_cast<std::size_t>(levels));
  std::vector<Tensor<T>> dtemplate(static_cast<std::size_t>(levels));

  Tensor<T> dx = blocks.conv1x1_backward("head", tr.head_input, dlogits, grads, true);
  // The decoder ran levels num_levels-2 .. 0, so backward runs 0 .. num_levels-2.
  for (int l = 0; l <= levels - 2; ++l) {
    const auto& dt = tr.decoder[std::size_t(l)];
    const std::string prefix = level_name("decoder", l);
    Tensor<T> djoined = blocks.backward(prefix, dt.block, dx, grads, true);
    Tensor<T> dskip, dup;
    split_channels(djoined, cfg_.channels_at(l), dskip, dup);
    add_into(dfused[std::size_t(l)], dskip);
    dx = blocks.conv1x1_backward(prefix + ".up", dt.deep_input, layers::upsample_backward(dup), grads, true);
  }
  add_into(dfused[std::size_t(levels - 1)], dx);

  Tensor<T> dinput;
  for (int l = levels - 1; l >= 0; --l) {
    const auto& lt = tr.image_levels[std::size_t(l)];
    const auto& ft = tr.fusion[std::size_t(l)];
    const Tensor<T>& f1 = lt.block.output;
    const Tensor<T>& dout = dfused[std::size_t(l)];
    Tensor<T> df1;
    switch (cfg_.variant) {
      case Variant::baseline:
      case Variant::single_encoder:
        df1 = dout;
        break;
      case Variant::priornet: {
        const Tensor<T>& f2 = tr.template_levels[std::size_t(l)].block.output;
        df1 = Tensor<T>(f1.channels(), f1.extent());
        Tensor<T>& df2 = dtemplate[std::size_t(l)];
        df2 = Tensor<T>(f2.channels(), f2.extent());
        const AttentionField<T> dgate = csam_apply_backward(f1, ft.gate, dout, df1);
        csam_weights_backward(f1, f2, ft.weights, csam_gate_backward(dgate, cfg_.gating), df1, df2);
        break;
      }
      case Variant::dual_encoder: {
        Tensor<T> djoined = blocks.conv1x1_backward(level_name("fusion", l), ft.joined, dout, grads, true);
        split_channels(djoined, cfg_.channels_at(l), df1, dtemplate[std::size_t(l)]);
        break;
      }
    }
    Tensor<T> din = blocks.backward(level_name("image_encoder", l), lt.block, df1, grads, true);
    if (l > 0)
      add_into(dfused[std::size_t(l - 1)], layers::max_pool_backward(lt.pooled_from, lt.pool_argmax, din));
    else
      dinput = std::move(din);
  }

  if (cfg_.has_template_encoder()) {
    Tensor<T> carry;
    for (int l = levels - 1; l >= 0; --l) {
      const auto& lt = tr.template_levels[std::size_t(l)];
      Tensor<T> dout = dtemplate[std::size_t(l)];
      if (!carry.empty()) add_into(dout, carry);
      Tensor<T> din = blocks.backward(level_name("template_encoder", l), lt.block, dout, grads, l > 0);
      if (l > 0) carry = layers::max_pool_backward(lt.pooled_from, lt.pool_argmax, din);
    }
  }
  return dinput;
}

template <typename T>
std::vector<Tensor<T>> Network<T>::encode(const Tensor<T>& x, const ParamTable<T>& params, Branch branch) const {
  if (branch == Branch::template_image && !cfg_.has_template_encoder())
    throw ConfigError(to_string(cfg_.variant) + " has no template encoder");
  check_grid(x, cfg_, cfg_.input_channels(branch), "encoder input");
  const Blocks<T> blocks(cfg_, params);
  std::vector<EncoderLevelTrace<T>> traces;
  return run_encoder(blocks, cfg_, branch, x, traces);
}

template <typename T>
Tensor<T> Network<T>::decode(const Tensor<T>& bottleneck, const std::vector<Tensor<T>>& skips,
                             const ParamTable<T>& params) const {
  if (skips.size() != std::size_t(cfg_.num_levels - 1))
    throw ShapeError("decoder: expected " + std::to_string(cfg_.num_levels - 1) + " skip connections, got " +
                     std::to_string(skips.size()));
  const int deepest = cfg_.num_levels - 1;
  if (bottleneck.channels() != cfg_.channels_at(deepest))
    throw ShapeError("decoder: bottleneck has " + std::to_string(bottleneck.channels()) + " channels, expected " +
                     std::to_string(cfg_.channels_at(deepest)));
  const Blocks<T> blocks(cfg_, params);
  std::vector<const Tensor<T>*> ptrs;
  for (const auto& s : skips) ptrs.push_back(&s);
  std::vector<DecoderLevelTrace<T>> traces;
  Tensor<T> head_input;
  return run_decoder(blocks, cfg_, bottleneck, ptrs, traces, head_input);
}

template <typename T>
Tensor<T> image_branch_input(const Volume& target, const TemplateBundle* bundle, const NetworkConfig& cfg) {
  Tensor<T> x = volume_tensor<T>(target);
  if (cfg.variant != Variant::single_encoder) return x;
  if (bundle == nullptr) throw ConfigError("single_encoder needs a template bundle");
  if (!(bundle->image.extent == target.extent))
    throw ShapeError("target " + target.extent.str() + " and template " + bundle->image.extent.str() +
                     " differ in shape");
  return concat_channels(x, template_tensor<T>(*bundle));
}

std::vector<FeatureMap> encoder_forward(const FeatureMap& x, const Parameters& params, Branch branch,
                                        const NetworkConfig& cfg) {
  return Network<double>(cfg).encode(x, cast_parameters<double>(params), branch);
}

FeatureMap decoder_forward(const FeatureMap& bottleneck, const std::vector<FeatureMap>& skips,
                           const Parameters& params, const NetworkConfig& cfg) {
  return Network<double>(cfg).decode(bottleneck, skips, cast_parameters<double>(params));
}

FeatureMap variant_forward(const Volume& target, const TemplateBundle* bundle, const Parameters& params,
                           const NetworkConfig& cfg) {
  if (cfg.uses_template() && bundle == nullptr)
    throw ConfigError(to_string(cfg.variant) + " needs a template bundle");
  if (bundle != nullptr && !(bundle->image.extent == target.extent))
    throw ShapeError("target " + target.extent.str() + " and template " + bundle->image.extent.str() +
                     " differ in shape");
  const Network<double> net(cfg);
  const auto table = cast_parameters<double>(params);
  const FeatureMap x = image_branch_input<double>(target, bundle, cfg);
  if (!cfg.has_template_encoder()) return net.forward(x, nullptr, table);
  const FeatureMap t = template_tensor<double>(*bundle);
  return net.forward(x, &t, table);
}

FeatureMap priornet_forward(const Volume& target, const TemplateBundle& bundle, const Parameters& params,
                            const NetworkConfig& cfg) {
  if (cfg.variant != Variant::priornet) throw ConfigError("priornet_forward needs variant = priornet");
  return variant_forward(target, &bundle, params, cfg);
}

template class Network<float>;
template class Network<double>;
template ParamTable<float> cast_parameters<float>(const Parameters&);
template ParamTable<double> cast_parameters<double>(const Parameters&);
template ParamTable<float> zero_table<float>(const Parameters&);
template ParamTable<double> zero_table<double>(const Parameters&);
template void accumulate(const ParamTable<float>&, Parameters&);
template void accumulate(const ParamTable<double>&, Parameters&);
template Tensor<float> image_branch_input<float>(const Volume&, const TemplateBundle*, const NetworkConfig&);
template Tensor<double> image_branch_input<double>(const Volume&, const TemplateBundle*, const NetworkConfig&);

}  // namespace priornet
