#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "priornet/errors.hpp"
#include "priornet/training.hpp"

namespace priornet {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'P', 'N', 'C', 'K', 'P', 'T', '\0', '\0'};

enum Kind : std::uint8_t { text = 0, f64_array = 1, i64 = 2 };

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  template <typename T>
  void raw(const T& x) {
    out_.write(reinterpret_cast<const char*>(&x), sizeof(T));
  }
  void name(const std::string& n, Kind kind) {
    raw(std::uint32_t(n.size()));
    out_.write(n.data(), std::streamsize(n.size()));
    raw(std::uint8_t(kind));
  }
  void put_text(const std::string& n, const std::string& value) {
    name(n, text);
    raw(std::uint64_t(value.size()));
    out_.write(value.data(), std::streamsize(value.size()));
  }
  void put_i64(const std::string& n, std::int64_t value) {
    name(n, i64);
    raw(value);
  }
  void put_array(const std::string& n, const std::vector<int>& shape, const std::vector<double>& values) {
    name(n, f64_array);
    raw(std::uint32_t(shape.size()));
    for (int d : shape) raw(std::uint32_t(d));
    out_.write(reinterpret_cast<const char*>(values.data()), std::streamsize(values.size() * sizeof(double)));
  }

 private:
  std::ostream& out_;
};

struct Record {
  Kind kind = text;
  std::string text_value;
  std::int64_t int_value = 0;
  ParamArray array;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}

  template <typename T>
  T raw() {
    T x{};
    read(reinterpret_cast<char*>(&x), sizeof(T));
    return x;
  }
  void read(char* dst, std::size_t n) {
    in_.read(dst, std::streamsize(n));
    if (std::size_t(in_.gcount()) != n) throw FormatError(path_ + ": checkpoint is truncated");
  }
  std::string bytes(std::uint64_t n) {
    if (n > (std::uint64_t(1) << 32)) throw FormatError(path_ + ": implausible record length");
    std::string s(std::size_t(n), '\0');
    read(s.data(), s.size());
    return s;
  }
  std::pair<std::string, Record> record() {
    std::string n = bytes(raw<std::uint32_t>());
    Record r;
    const auto kind = raw<std::uint8_t>();
    switch (kind) {
      case text:
        r.kind = text;
        r.text_value = bytes(raw<std::uint64_t>());
        break;
      case i64:
        r.kind = i64;
        r.int_value = raw<std::int64_t>();
        break;
      case f64_array: {
        r.kind = f64_array;
        const auto ndim = raw<std::uint32_t>();
        if (ndim > 8) throw FormatError(path_ + ": array '" + n + "' has " + std::to_string(ndim) + " dims");
        std::uint64_t count = 1;
        for (std::uint32_t d = 0; d < ndim; ++d) {
          const auto dim = raw<std::uint32_t>();
          r.array.shape.push_back(int(dim));
          count *= dim;
          if (count > (std::uint64_t(1) << 32)) throw FormatError(path_ + ": array '" + n + "' is implausibly large");
        }
        r.array.values.resize(std::size_t(count));
        read(reinterpret_cast<char*>(r.array.values.data()), r.array.values.size() * sizeof(double));
        break;
      }
      default:
        throw FormatError(path_ + ": unknown record kind " + std::to_string(kind) + " for '" + n + "'");
    }
    return {std::move(n), std::move(r)};
  }

 private:
  std::istream& in_;
  std::string path_;
};

// Parses the "key=value key=value" lines produced by canonical().
std::map<std::string, std::string> split_canonical(const std::string& line) {
  std::map<std::string, std::string> kv;
  std::istringstream in(line);
  for (std::string tok; in >> tok;) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("malformed config record '" + line + "'");
    kv[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return kv;
}

template <typename T>
T field(const std::map<std::string, std::string>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw FormatError("checkpoint config lacks '" + key + "'");
  std::istringstream in(it->second);
  T value{};
  if (!(in >> value)) throw FormatError("checkpoint config field '" + key + "' is malformed");
  return value;
}

NetworkConfig network_from_text(const std::string& line) {
  const auto kv = split_canonical(line);
  NetworkConfig cfg;
  cfg.dimensionality = field<int>(kv, "dimensionality");
  cfg.num_classes = field<int>(kv, "num_classes");
  cfg.base_channels = field<int>(kv, "base_channels");
  cfg.num_levels = field<int>(kv, "num_levels");
  cfg.seed = field<std::uint64_t>(kv, "seed");
  try {
    cfg.variant = parse_variant(field<std::string>(kv, "variant"));
    cfg.normalization = parse_normalization(field<std::string>(kv, "normalization"));
    cfg.gating = parse_gating(field<std::string>(kv, "csam_gating"));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint network config: ") + e.what());
  }
  return cfg;
}

TrainConfig train_from_text(const std::string& line) {
  const auto kv = split_canonical(line);
  TrainConfig cfg;
  cfg.epochs = field<int>(kv, "epochs");
  cfg.batch_size = field<int>(kv, "batch_size");
  cfg.lr_start = field<double>(kv, "lr_start");
  cfg.lr_end = field<double>(kv, "lr_end");
  cfg.beta1 = field<double>(kv, "beta1");
  cfg.beta2 = field<double>(kv, "beta2");
  cfg.adam_eps = field<double>(kv, "adam_eps");
  cfg.seed = field<std::uint64_t>(kv, "seed");
  cfg.dice_eps = field<double>(kv, "dice_eps");
  cfg.grad_clip = field<double>(kv, "grad_clip");
  return cfg;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ostringstream buf;
  Writer w(buf);
  buf.write(kMagic, sizeof kMagic);
  w.raw(kCheckpointVersion);
  const std::uint32_t records = 6 + 3 * std::uint32_t(ckpt.params.size()) + 1;
  w.raw(records);
  w.put_text("config.network", ckpt.network.canonical());
  w.put_text("config.train", ckpt.train.canonical());
  w.put_i64("state.epoch", ckpt.epoch);
  w.put_i64("state.step", ckpt.adam.step);
  w.put_text("state.rng", ckpt.rng_state);
  w.put_array("state.epoch_losses", {int(ckpt.epoch_losses.size())}, ckpt.epoch_losses);
  for (const auto& [name, p] : ckpt.params) w.put_array("param." + name, p.shape, p.values);
  for (const auto& [name, p] : ckpt.adam.m) w.put_array("adam_m." + name, p.shape, p.values);
  for (const auto& [name, p] : ckpt.adam.v) w.put_array("adam_v." + name, p.shape, p.values);
  w.put_text("end", "");

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint '" + path.string() + "'");
  const std::string bytes = buf.str();
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw Error("failed writing checkpoint '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig* expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint '" + path.string() + "'");
  Reader r(in, path.string());
  char magic[8];
  r.read(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError(path.string() + ": not a checkpoint file");
  const auto version = r.raw<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw CompatibilityError(path.string() + ": checkpoint version " + std::to_string(version) + ", expected " +
                             std::to_string(kCheckpointVersion));
  const auto count = r.raw<std::uint32_t>();

  Checkpoint ck;
  bool saw_end = false, saw_network = false, saw_train = false;
  for (std::uint32_t i = 0; i < count; ++i) {
    auto [name, rec] = r.record();
    auto expect = [&](Kind k) {
      if (rec.kind != k) throw FormatError(path.string() + ": record '" + name + "' has the wrong kind");
    };
    if (name == "config.network") {
      expect(text);
      ck.network = network_from_text(rec.text_value);
      saw_network = true;
    } else if (name == "config.train") {
      expect(text);
      ck.train = train_from_text(rec.text_value);
      saw_train = true;
    } else if (name == "state.epoch") {
      expect(i64);
      ck.epoch = int(rec.int_value);
    } else if (name == "state.step") {
      expect(i64);
      ck.adam.step = rec.int_value;
    } else if (name == "state.rng") {
      expect(text);
      ck.rng_state = rec.text_value;
    } else if (name == "state.epoch_losses") {
      expect(f64_array);
      ck.epoch_losses = std::move(rec.array.values);
    } else if (name.starts_with("param.")) {
      expect(f64_array);
      ck.params[name.substr(6)] = std::move(rec.array);
    } else if (name.starts_with("adam_m.")) {
      expect(f64_array);
      ck.adam.m[name.substr(7)] = std::move(rec.array);
    } else if (name.starts_with("adam_v.")) {
      expect(f64_array);
      ck.adam.v[name.substr(7)] = std::move(rec.array);
    } else if (name == "end") {
      saw_end = true;
    } else {
      throw FormatError(path.string() + ": unexpected record '" + name + "'");
    }
  }
  if (!saw_end || !saw_network || !saw_train) throw FormatError(path.string() + ": checkpoint is incomplete");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(path.string() + ": trailing bytes after checkpoint");

  // The stored parameter set must be exactly what the stored network builds.
  const auto reference = zeros_like(init_parameters(ck.network));
  auto same_layout = [&](const Parameters& p) {
    if (p.size() != reference.size()) return false;
    for (const auto& [n, a] : reference) {
      auto it = p.find(n);
      if (it == p.end() || it->second.shape != a.shape || it->second.size() != a.size()) return false;
    }
    return true;
  };
  if (!same_layout(ck.params) || !same_layout(ck.adam.m) || !same_layout(ck.adam.v))
    throw FormatError(path.string() + ": stored arrays do not match the stored network config");
  if (expected) check_compatible(ck, *expected);
  return ck;
}

// The init seed is not part of the architecture, so it is ignored here.
void check_compatible(const Checkpoint& ckpt, const NetworkConfig& cfg) {
  NetworkConfig stored = ckpt.network;
  stored.seed = cfg.seed;
  if (stored.canonical() != cfg.canonical())
    throw CompatibilityError("checkpoint network '" + ckpt.network.canonical() + "' does not match '" +
                             cfg.canonical() + "'");
}

}  // namespace priornet
