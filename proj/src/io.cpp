#include "priornet/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace priornet {

namespace {

constexpr std::size_t kNiftiHeaderSize = 348;
constexpr std::size_t kNiftiDataOffset = 352;

struct Grid {
  DataType type = DataType::float32;
  std::vector<int> dims;
  std::vector<double> spacing;
  std::vector<double> values;
};

std::size_t type_size(DataType t) {
  switch (t) {
    case DataType::uint8: return 1;
    case DataType::int16: return 2;
    case DataType::int32: return 4;
    case DataType::float32: return 4;
    case DataType::float64: return 8;
  }
  return 0;
}

std::int16_t nifti_code(DataType t) {
  switch (t) {
    case DataType::uint8: return 2;
    case DataType::int16: return 4;
    case DataType::int32: return 8;
    case DataType::float32: return 16;
    case DataType::float64: return 64;
  }
  return 0;
}

DataType from_nifti_code(int code) {
  switch (code) {
    case 2: return DataType::uint8;
    case 4: return DataType::int16;
    case 8: return DataType::int32;
    case 16: return DataType::float32;
    case 64: return DataType::float64;
    default: throw UnsupportedError("unsupported NIfTI datatype code " + std::to_string(code));
  }
}

template <typename U>
void store(std::vector<char>& buf, std::size_t offset, U value) {
  std::array<char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), &value, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  std::memcpy(buf.data() + offset, bytes.data(), sizeof(U));
}

template <typename U>
U load(const std::vector<char>& buf, std::size_t offset) {
  std::array<char, sizeof(U)> bytes;
  std::memcpy(bytes.data(), buf.data() + offset, sizeof(U));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  U value;
  std::memcpy(&value, bytes.data(), sizeof(U));
  return value;
}

void encode_values(const std::vector<double>& values, DataType t, std::vector<char>& buf, std::size_t offset) {
  const std::size_t w = type_size(t);
  for (std::size_t n = 0; n < values.size(); ++n) {
    const std::size_t o = offset + n * w;
    switch (t) {
      case DataType::uint8: store(buf, o, std::uint8_t(values[n])); break;
      case DataType::int16: store(buf, o, std::int16_t(values[n])); break;
      case DataType::int32: store(buf, o, std::int32_t(values[n])); break;
      case DataType::float32: store(buf, o, float(values[n])); break;
      case DataType::float64: store(buf, o, values[n]); break;
    }
  }
}

std::vector<double> decode_values(const std::vector<char>& buf, std::size_t offset, std::size_t count, DataType t) {
  std::vector<double> values(count);
  const std::size_t w = type_size(t);
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t o = offset + n * w;
    switch (t) {
      case DataType::uint8: values[n] = load<std::uint8_t>(buf, o); break;
      case DataType::int16: values[n] = load<std::int16_t>(buf, o); break;
      case DataType::int32: values[n] = load<std::int32_t>(buf, o); break;
      case DataType::float32: values[n] = load<float>(buf, o); break;
      case DataType::float64: values[n] = load<double>(buf, o); break;
    }
  }
  return values;
}

std::size_t product(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) n *= std::size_t(d);
  return n;
}

// C order (last axis fastest) <-> NIfTI order (first axis fastest).
std::vector<double> reorder(const std::vector<double>& in, const std::vector<int>& dims, bool to_fortran) {
  const Extent e = Extent::from_dims(dims);
  std::vector<double> out(in.size());
  for (int i = 0; i < e.h; ++i)
    for (int j = 0; j < e.w; ++j)
      for (int k = 0; k < e.d; ++k) {
        const std::size_t c = e.index(i, j, k);
        const std::size_t f = std::size_t(i) + std::size_t(e.h) * (std::size_t(j) + std::size_t(e.w) * std::size_t(k));
        if (to_fortran)
          out[f] = in[c];
        else
          out[c] = in[f];
      }
  return out;
}

std::vector<char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_bytes(const std::filesystem::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

std::vector<char> encode_pvol(const Grid& g) {
  std::ostringstream header;
  header << "PVOL1 " << to_string(g.type) << " " << g.dims.size();
  for (int d : g.dims) header << " " << d;
  header << std::setprecision(17);
  for (double s : g.spacing) header << " " << s;
  header << "\n";
  const std::string h = header.str();
  std::vector<char> buf(h.size() + g.values.size() * type_size(g.type));
  std::memcpy(buf.data(), h.data(), h.size());
  encode_values(g.values, g.type, buf, h.size());
  return buf;
}

Grid decode_pvol(const std::vector<char>& buf, const std::string& name) {
  const auto nl = std::find(buf.begin(), buf.begin() + std::ptrdiff_t(std::min<std::size_t>(buf.size(), 4096)), '\n');
  if (nl == buf.end() || nl - buf.begin() >= 4096) throw FormatError(name + ": PVOL1 header line is not terminated");
  std::istringstream header(std::string(buf.begin(), nl));
  std::string magic, dtype;
  std::size_t ndim = 0;
  header >> magic >> dtype >> ndim;
  if (magic != "PVOL1") throw FormatError(name + ": bad magic '" + magic + "'");
  Grid g;
  try {
    g.type = parse_data_type(dtype);
  } catch (const ConfigError&) {
    throw UnsupportedError(name + ": unsupported data type '" + dtype + "'");
  }
  if (!header || ndim < 2 || ndim > 3) throw FormatError(name + ": PVOL1 header must declare 2 or 3 dimensions");
  g.dims.resize(ndim);
  g.spacing.resize(ndim);
  for (auto& d : g.dims) header >> d;
  for (auto& s : g.spacing) header >> s;
  if (!header) throw FormatError(name + ": PVOL1 header is incomplete");
  std::string extra;
  if (header >> extra) throw FormatError(name + ": trailing tokens in PVOL1 header");
  for (int d : g.dims)
    if (d < 1) throw FormatError(name + ": non-positive dimension");
  const std::size_t offset = std::size_t(nl - buf.begin()) + 1;
  const std::size_t expected = product(g.dims) * type_size(g.type);
  if (buf.size() - offset != expected)
    throw FormatError(name + ": expected " + std::to_string(expected) + " data bytes, found " +
                      std::to_string(buf.size() - offset));
  g.values = decode_values(buf, offset, product(g.dims), g.type);
  return g;
}

std::vector<char> encode_nifti(const Grid& g) {
  std::vector<char> buf(kNiftiDataOffset + g.values.size() * type_size(g.type), 0);
  store<std::int32_t>(buf, 0, std::int32_t(kNiftiHeaderSize));
  buf[38] = 'r';
  store<std::int16_t>(buf, 40, std::int16_t(g.dims.size()));
  for (std::size_t a = 0; a < 7; ++a)
    store<std::int16_t>(buf, 42 + 2 * a, std::int16_t(a < g.dims.size() ? g.dims[a] : 1));
  store<std::int16_t>(buf, 70, nifti_code(g.type));
  store<std::int16_t>(buf, 72, std::int16_t(8 * type_size(g.type)));
  store<float>(buf, 76, 1.0f);  // qfac
  for (std::size_t a = 0; a < 7; ++a) store<float>(buf, 80 + 4 * a, a < g.spacing.size() ? float(g.spacing[a]) : 1.0f);
  store<float>(buf, 108, float(kNiftiDataOffset));
  store<float>(buf, 112, 1.0f);  // scl_slope
  buf[123] = 2;                  // xyzt_units: mm
  std::memcpy(buf.data() + 344, "n+1\0", 4);
  for (std::size_t a = 0; a < g.dims.size(); ++a)
    if (g.dims[a] > std::numeric_limits<std::int16_t>::max())
      throw UnsupportedError("NIfTI-1 dimensions are limited to 32767");
  encode_values(reorder(g.values, g.dims, true), g.type, buf, kNiftiDataOffset);
  return buf;
}

Grid decode_nifti(const std::vector<char>& buf, const std::string& name) {
  if (buf.size() < kNiftiHeaderSize) throw FormatError(name + ": file is shorter than a NIfTI-1 header");
  const auto sizeof_hdr = load<std::int32_t>(buf, 0);
  if (sizeof_hdr != std::int32_t(kNiftiHeaderSize)) {
    if (std::int32_t(__builtin_bswap32(std::uint32_t(sizeof_hdr))) == std::int32_t(kNiftiHeaderSize))
      throw UnsupportedError(name + ": big-endian NIfTI is not supported");
    throw FormatError(name + ": sizeof_hdr is " + std::to_string(sizeof_hdr) + ", expected 348");
  }
  const std::string magic(buf.data() + 344, 3);
  if (magic == "ni1") throw UnsupportedError(name + ": two-file NIfTI (.hdr/.img) is not supported");
  if (magic != "n+1" || buf[347] != '\0') throw FormatError(name + ": bad NIfTI magic");
  const int ndim = load<std::int16_t>(buf, 40);
  if (ndim < 1 || ndim > 7) throw FormatError(name + ": invalid dim[0] = " + std::to_string(ndim));
  Grid g;
  g.type = from_nifti_code(load<std::int16_t>(buf, 70));
  for (int a = 0; a < ndim; ++a) {
    const int d = load<std::int16_t>(buf, 42 + 2 * std::size_t(a));
    if (d < 1) throw FormatError(name + ": non-positive dimension");
    g.dims.push_back(d);
    g.spacing.push_back(load<float>(buf, 80 + 4 * std::size_t(a)));
  }
  while (g.dims.size() > 3 && g.dims.back() == 1) {
    g.dims.pop_back();
    g.spacing.pop_back();
  }
  if (g.dims.size() < 2 || g.dims.size() > 3)
    throw UnsupportedError(name + ": only 2D and 3D NIfTI images are supported");
  const float vox_offset = load<float>(buf, 108);
  if (!(vox_offset >= float(kNiftiHeaderSize)) || vox_offset != std::floor(vox_offset))
    throw FormatError(name + ": invalid vox_offset");
  const std::size_t offset = std::size_t(vox_offset);
  const std::size_t count = product(g.dims);
  if (buf.size() < offset + count * type_size(g.type))
    throw FormatError(name + ": file is truncated (needs " + std::to_string(offset + count * type_size(g.type)) +
                      " bytes, has " + std::to_string(buf.size()) + ")");
  g.values = reorder(decode_values(buf, offset, count, g.type), g.dims, false);
  const float slope = load<float>(buf, 112), inter = load<float>(buf, 116);
  if (slope != 0.0f && (slope != 1.0f || inter != 0.0f))
    for (double& v : g.values) v = v * slope + inter;
  return g;
}

Grid read_grid(const std::filesystem::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() >= 5 && std::string(bytes.data(), 5) == "PVOL1") return decode_pvol(bytes, path.string());
  return decode_nifti(bytes, path.string());
}

void write_grid(const std::filesystem::path& path, const Grid& g) {
  write_bytes(path, format_for_path(path) == FileFormat::nifti ? encode_nifti(g) : encode_pvol(g));
}

}  // namespace

std::string to_string(DataType t) {
  switch (t) {
    case DataType::uint8: return "uint8";
    case DataType::int16: return "int16";
    case DataType::int32: return "int32";
    case DataType::float32: return "float32";
    case DataType::float64: return "float64";
  }
  return "float32";
}

DataType parse_data_type(const std::string& s) {
  for (DataType t : {DataType::uint8, DataType::int16, DataType::int32, DataType::float32, DataType::float64})
    if (to_string(t) == s) return t;
  throw ConfigError("unknown data type '" + s + "'");
}

FileFormat format_for_path(const std::filesystem::path& path) {
  return path.extension() == ".nii" ? FileFormat::nifti : FileFormat::pvol;
}

void write_volume(const std::filesystem::path& path, const Volume& v) {
  v.validate();
  Grid g;
  g.type = DataType::float32;
  g.dims = v.extent.dims();
  g.spacing = v.spacing;
  g.values.assign(v.data.begin(), v.data.end());
  write_grid(path, g);
}

void write_labelmap(const std::filesystem::path& path, const LabelMap& labels) {
  labels.validate();
  Grid g;
  const auto max_label = labels.max_label();
  g.type = max_label <= 255 ? DataType::uint8 : DataType::int16;
  if (max_label > std::numeric_limits<std::int16_t>::max()) throw UnsupportedError("label values exceed int16");
  g.dims = labels.extent.dims();
  g.spacing = labels.spacing;
  g.values.assign(labels.data.begin(), labels.data.end());
  write_grid(path, g);
}

Volume read_volume(const std::filesystem::path& path) {
  Grid g = read_grid(path);
  Volume v(Extent::from_dims(g.dims));
  v.spacing = g.spacing;
  for (std::size_t n = 0; n < g.values.size(); ++n) v.data[n] = float(g.values[n]);
  v.validate();
  return v;
}

LabelMap read_labelmap(const std::filesystem::path& path, int num_classes) {
  Grid g = read_grid(path);
  LabelMap labels(Extent::from_dims(g.dims), 1);
  labels.spacing = g.spacing;
  std::int32_t max_label = 0;
  for (std::size_t n = 0; n < g.values.size(); ++n) {
    const double v = g.values[n];
    if (v != std::floor(v) || v < 0.0 || v > double(std::numeric_limits<std::int32_t>::max()))
      throw FormatError(path.string() + ": labelmap holds a non-integer or negative value");
    labels.data[n] = std::int32_t(v);
    max_label = std::max(max_label, labels.data[n]);
  }
  labels.num_classes = num_classes > 0 ? num_classes : std::max<std::int32_t>(1, max_label);
  labels.validate();
  return labels;
}

}  // namespace priornet
