#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "avp/tensor.hpp"

namespace avp {

// Fixture tensor file: "AVPT", u32 rank, u32 dims[rank], then f64 values in
// row-major order. All integers and floats little-endian.
struct RawTensor {
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

void write_raw_tensor(std::ostream& out, const RawTensor& tensor);
RawTensor read_raw_tensor(std::istream& in);

void save_tensor(const std::string& path, const RawTensor& tensor);
RawTensor load_tensor(const std::string& path);

// Rank-3 (H, W, C).
RawTensor to_raw(const FeatureMap& map);
FeatureMap feature_map_from_raw(const RawTensor& raw);

// Rank-3 (H, W, 2) with (dy, dx) in the channel axis.
RawTensor to_raw(const MotionField& motion);
MotionField motion_from_raw(const RawTensor& raw);

// Rank-2 (H, W).
RawTensor to_raw(const Plane<double>& plane);
RawTensor to_raw(const BinaryMask& mask);
QualityMap quality_from_raw(const RawTensor& raw);
BinaryMask mask_from_raw(const RawTensor& raw);

}  // namespace avp
