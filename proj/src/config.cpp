#include "priornet/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "priornet/errors.hpp"

namespace priornet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& s, const char* what) {
  T value{};
  const char* end = s.data() + s.size();
  const char* begin = s.data();
  if (!s.empty() && s[0] == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || s.empty()) throw ConfigError("expected " + std::string(what) + ", got '" + s + "'");
  return value;
}

int parse_int(const std::string& s) { return parse_number<int>(s, "an integer"); }
std::uint64_t parse_u64(const std::string& s) { return parse_number<std::uint64_t>(s, "a non-negative integer"); }
double parse_double(const std::string& s) { return parse_number<double>(s, "a number"); }

bool parse_bool(const std::string& s) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

template <typename T, typename F>
std::vector<T> parse_list(const std::string& s, F item) {
  std::vector<T> out;
  std::stringstream in(s);
  for (std::string tok; std::getline(in, tok, ',');) out.push_back(item(trim(tok)));
  if (out.empty()) throw ConfigError("expected a comma-separated list");
  return out;
}

std::string fmt(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, ptr);
}

template <typename T>
std::string fmt_list(const std::vector<T>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>)
      out += fmt(v[i]);
    else
      out += std::to_string(v[i]);
  }
  return out;
}

// One settable key. print returns nullopt for an unset optional.
struct Field {
  std::string section, key;
  std::function<void(const std::string&)> parse;
  std::function<std::optional<std::string>()> print;
};

std::vector<Field> fields(RunConfig& c) {
  std::vector<Field> f;
  auto add = [&f](std::string section, std::string key, std::function<void(const std::string&)> parse,
                  std::function<std::optional<std::string>()> print) {
    f.push_back({std::move(section), std::move(key), std::move(parse), std::move(print)});
  };
  auto int_field = [&add](const std::string& s, const std::string& k, int& ref) {
    add(s, k, [&ref](const std::string& v) { ref = parse_int(v); }, [&ref] { return std::to_string(ref); });
  };
  auto u64_field = [&add](const std::string& s, const std::string& k, std::uint64_t& ref) {
    add(s, k, [&ref](const std::string& v) { ref = parse_u64(v); }, [&ref] { return std::to_string(ref); });
  };
  auto real_field = [&add](const std::string& s, const std::string& k, double& ref) {
    add(s, k, [&ref](const std::string& v) { ref = parse_double(v); }, [&ref] { return fmt(ref); });
  };

  auto& n = c.network;
  int_field("network", "dimensionality", n.dimensionality);
  int_field("network", "num_classes", n.num_classes);
  int_field("network", "base_channels", n.base_channels);
  int_field("network", "num_levels", n.num_levels);
  add("network", "variant", [&n](const std::string& v) { n.variant = parse_variant(v); },
      [&n] { return to_string(n.variant); });
  u64_field("network", "seed", n.seed);
  add("network", "normalization", [&n](const std::string& v) { n.normalization = parse_normalization(v); },
      [&n] { return to_string(n.normalization); });
  add("network", "csam_gating", [&n](const std::string& v) { n.gating = parse_gating(v); },
      [&n] { return to_string(n.gating); });

  auto& t = c.train;
  int_field("train", "epochs", t.epochs);
  int_field("train", "batch_size", t.batch_size);
  real_field("train", "lr_start", t.lr_start);
  real_field("train", "lr_end", t.lr_end);
  real_field("train", "beta1", t.beta1);
  real_field("train", "beta2", t.beta2);
  real_field("train", "adam_eps", t.adam_eps);
  u64_field("train", "seed", t.seed);
  real_field("train", "dice_eps", t.dice_eps);
  real_field("train", "grad_clip", t.grad_clip);
  add("train", "checkpoint", [&t](const std::string& v) { t.checkpoint = v; },
      [&t]() -> std::optional<std::string> {
        if (t.checkpoint.empty()) return std::nullopt;
        return t.checkpoint;
      });

  auto& d = c.data;
  add("data", "manifest", [&d](const std::string& v) { d.manifest = v; },
      [&d]() -> std::optional<std::string> {
        if (d.manifest.empty()) return std::nullopt;
        return d.manifest;
      });
  add("data", "crop", [&d](const std::string& v) { d.crop = parse_list<int>(v, parse_int); },
      [&d]() -> std::optional<std::string> {
        if (!d.crop) return std::nullopt;
        return fmt_list(*d.crop);
      });
  add("data", "truncate",
      [&d](const std::string& v) {
        const auto r = parse_list<double>(v, parse_double);
        if (r.size() != 2) throw ConfigError("truncate takes two values: low, high");
        d.truncate = std::pair{r[0], r[1]};
      },
      [&d]() -> std::optional<std::string> {
        if (!d.truncate) return std::nullopt;
        return fmt(d.truncate->first) + ", " + fmt(d.truncate->second);
      });
  add("data", "zscore", [&d](const std::string& v) { d.zscore = parse_bool(v); },
      [&d] { return std::string(d.zscore ? "true" : "false"); });
  add("data", "test_count", [&d](const std::string& v) { d.test_count = std::size_t(parse_u64(v)); },
      [&d]() -> std::optional<std::string> {
        if (!d.test_count) return std::nullopt;
        return std::to_string(*d.test_count);
      });
  add("data", "test_fraction", [&d](const std::string& v) { d.test_fraction = parse_double(v); },
      [&d]() -> std::optional<std::string> {
        if (!d.test_fraction) return std::nullopt;
        return fmt(*d.test_fraction);
      });
  u64_field("data", "split_seed", d.split_seed);

  auto& e = c.eval;
  u64_field("eval", "template_seed", e.template_seed);
  add("eval", "ablation_seeds", [&e](const std::string& v) { e.ablation_seeds = parse_list<std::uint64_t>(v, parse_u64); },
      [&e] { return fmt_list(e.ablation_seeds); });
  u64_field("eval", "robustness_seed", e.robustness_seed);

  auto& s = c.synthetic;
  int_field("synthetic", "num_volumes", s.num_volumes);
  add("synthetic", "shape", [&s](const std::string& v) { s.shape = parse_list<int>(v, parse_int); },
      [&s] { return fmt_list(s.shape); });
  int_field("synthetic", "num_classes", s.num_classes);
  add("synthetic", "class_means", [&s](const std::string& v) { s.class_means = parse_list<double>(v, parse_double); },
      [&s]() -> std::optional<std::string> {
        if (s.class_means.empty()) return std::nullopt;
        return fmt_list(s.class_means);
      });
  add("synthetic", "class_stds", [&s](const std::string& v) { s.class_stds = parse_list<double>(v, parse_double); },
      [&s]() -> std::optional<std::string> {
        if (s.class_stds.empty()) return std::nullopt;
        return fmt_list(s.class_stds);
      });
  real_field("synthetic", "background_mean", s.background_mean);
  real_field("synthetic", "background_std", s.background_std);
  real_field("synthetic", "radius_min", s.radius_min);
  real_field("synthetic", "radius_max", s.radius_max);
  real_field("synthetic", "position_jitter", s.position_jitter);
  int_field("synthetic", "distractors", s.distractors);
  real_field("synthetic", "noise_std", s.noise_std);
  u64_field("synthetic", "seed", s.seed);
  int_field("synthetic", "max_attempts", s.max_attempts);
  add("synthetic", "format",
      [&c](const std::string& v) {
        if (v != "pvol" && v != "nifti") throw ConfigError("format must be pvol or nifti, got '" + v + "'");
        c.synthetic_format = v;
        c.synthetic.extension = v == "pvol" ? ".pvol" : ".nii";
      },
      [&c] { return c.synthetic_format; });
  return f;
}

}  // namespace

Preprocessing DataConfig::preprocessing() const { return {crop, truncate, zscore}; }

std::filesystem::path RunConfig::manifest_path() const {
  if (data.manifest.empty()) throw ConfigError("[data] manifest is not set");
  std::filesystem::path p(data.manifest);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

std::string RunConfig::to_text() const {
  RunConfig copy = *this;
  std::ostringstream os;
  std::string section;
  for (const auto& f : fields(copy)) {
    if (f.section != section) {
      os << (section.empty() ? "" : "\n") << "[" << f.section << "]\n";
      section = f.section;
    }
    if (auto v = f.print())
      os << f.key << " = " << *v << "\n";
    else
      os << "# " << f.key << " unset\n";
  }
  return os.str();
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  auto table = fields(cfg);
  std::istringstream in(text);
  std::string section;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
  };
  for (std::string raw; std::getline(in, raw);) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      bool known = false;
      for (const auto& f : table) known = known || f.section == section;
      if (!known) throw fail("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected 'key = value'");
    if (section.empty()) throw fail("'" + line + "' appears before any section header");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const Field& f) { return f.section == section && f.key == key; });
    if (it == table.end()) throw fail("unknown key '" + key + "' in [" + section + "]");
    try {
      it->parse(value);
    } catch (const ConfigError& e) {
      throw fail(key + ": " + e.what());
    }
  }
  try {
    cfg.network.validate();
    cfg.train.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  return cfg;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  RunConfig cfg = parse_config_text(text.str(), path.string());
  cfg.base_dir = path.parent_path();
  return cfg;
}

DatasetCache load_data(const RunConfig& cfg) {
  DatasetManifest manifest = read_manifest(cfg.manifest_path());
  if (cfg.data.test_count || cfg.data.test_fraction) {
    SplitRequest req;
    req.test_count = cfg.data.test_count;
    if (cfg.data.test_fraction) req.test_fraction = *cfg.data.test_fraction;
    manifest = split_dataset(manifest, req, cfg.data.split_seed);
  }
  if (manifest.num_classes != cfg.network.num_classes)
    throw ConfigError("[network] num_classes is " + std::to_string(cfg.network.num_classes) + " but the manifest has " +
                      std::to_string(manifest.num_classes));
  return DatasetCache(std::move(manifest), cfg.data.preprocessing());
}

}  // namespace priornet
