#include "avp/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace avp {
namespace {

constexpr std::array<char, 4> kMagic = {'A', 'V', 'P', 'T'};
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> bytes;
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  require(static_cast<bool>(in), "tensor file: truncated header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& in) {
  std::array<unsigned char, 8> bytes{};
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  require(static_cast<bool>(in), "tensor file: truncated payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

void require_rank(const RawTensor& raw, std::size_t rank, const char* what) {
  require(raw.dims.size() == rank, std::string(what) + ": unexpected tensor rank");
}

}  // namespace

void write_raw_tensor(std::ostream& out, const RawTensor& tensor) {
  require(tensor.dims.size() <= kMaxRank, "tensor file: rank too large");
  require(element_count(tensor.dims) == tensor.values.size(),
          "tensor file: value count does not match dims");
  out.write(kMagic.data(), kMagic.size());
  put_u32(out, static_cast<std::uint32_t>(tensor.dims.size()));
  for (auto d : tensor.dims) put_u32(out, d);
  for (double v : tensor.values) put_f64(out, v);
}

RawTensor read_raw_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  require(static_cast<bool>(in) && magic == kMagic, "tensor file: bad magic");
  RawTensor raw;
  const std::uint32_t rank = get_u32(in);
  require(rank <= kMaxRank, "tensor file: rank too large");
  raw.dims.resize(rank);
  for (auto& d : raw.dims) d = get_u32(in);
  raw.values.resize(element_count(raw.dims));
  for (auto& v : raw.values) v = get_f64(in);
  return raw;
}

void save_tensor(const std::string& path, const RawTensor& tensor) {
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), "cannot open for writing: " + path);
  write_raw_tensor(out, tensor);
}

RawTensor load_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), "cannot open for reading: " + path);
  return read_raw_tensor(in);
}

RawTensor to_raw(const FeatureMap& map) {
  RawTensor raw;
  raw.dims = {static_cast<std::uint32_t>(map.height()),
              static_cast<std::uint32_t>(map.width()),
              static_cast<std::uint32_t>(map.channels())};
  raw.values.assign(map.data().begin(), map.data().end());
  return raw;
}

FeatureMap feature_map_from_raw(const RawTensor& raw) {
  require_rank(raw, 3, "feature map");
  return FeatureMap(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[1]),
                    static_cast<int>(raw.dims[2]), raw.values);
}

RawTensor to_raw(const MotionField& motion) {
  RawTensor raw;
  raw.dims = {static_cast<std::uint32_t>(motion.height()),
              static_cast<std::uint32_t>(motion.width()), 2u};
  raw.values.assign(motion.data().begin(), motion.data().end());
  return raw;
}

MotionField motion_from_raw(const RawTensor& raw) {
  require_rank(raw, 3, "motion field");
  require(raw.dims[2] == 2, "motion field: last dimension must be 2");
  MotionField motion(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[1]));
  std::copy(raw.values.begin(), raw.values.end(), motion.data().begin());
  return motion;
}

RawTensor to_raw(const Plane<double>& plane) {
  RawTensor raw;
  raw.dims = {static_cast<std::uint32_t>(plane.height()),
              static_cast<std::uint32_t>(plane.width())};
  raw.values.assign(plane.values().begin(), plane.values().end());
  return raw;
}

RawTensor to_raw(const BinaryMask& mask) {
  RawTensor raw;
  raw.dims = {static_cast<std::uint32_t>(mask.height()),
              static_cast<std::uint32_t>(mask.width())};
  raw.values.reserve(mask.size());
  for (auto v : mask.values()) raw.values.push_back(static_cast<double>(v));
  return raw;
}

QualityMap quality_from_raw(const RawTensor& raw) {
  require_rank(raw, 2, "quality map");
  return QualityMap(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[1]),
                    raw.values);
}

BinaryMask mask_from_raw(const RawTensor& raw) {
  require_rank(raw, 2, "mask");
  std::vector<std::uint8_t> values;
  values.reserve(raw.values.size());
  for (double v : raw.values) {
    require(v == 0.0 || v == 1.0, "mask: values must be exactly 0 or 1");
    values.push_back(static_cast<std::uint8_t>(v));
  }
  return BinaryMask(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[1]),
                    std::move(values));
}

}  // namespace avp
