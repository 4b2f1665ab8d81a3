#include "avp/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace avp {

FeatureMap::FeatureMap(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  require(height > 0 && width > 0 && channels > 0,
          "FeatureMap: dimensions must be positive");
  data_.assign(positions() * static_cast<std::size_t>(channels), fill);
}

FeatureMap::FeatureMap(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  require(height > 0 && width > 0 && channels > 0,
          "FeatureMap: dimensions must be positive");
  require(data_.size() == positions() * static_cast<std::size_t>(channels),
          "FeatureMap: data length must equal height * width * channels");
}

bool FeatureMap::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double FeatureMap::min() const {
  require(!data_.empty(), "FeatureMap::min on empty map");
  return *std::min_element(data_.begin(), data_.end());
}

double FeatureMap::max() const {
  require(!data_.empty(), "FeatureMap::max on empty map");
  return *std::max_element(data_.begin(), data_.end());
}

MotionField::MotionField(int height, int width, double dy, double dx)
    : height_(height), width_(width) {
  require(height > 0 && width > 0, "MotionField: dimensions must be positive");
  disp_.resize(2 * static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
  for (std::size_t i = 0; i < disp_.size(); i += 2) {
    disp_[i] = dy;
    disp_[i + 1] = dx;
  }
}

bool MotionField::all_finite() const {
  return std::all_of(disp_.begin(), disp_.end(),
                     [](double v) { return std::isfinite(v); });
}

std::size_t BinaryMask::count_ones() const {
  return static_cast<std::size_t>(
      std::count(values().begin(), values().end(), std::uint8_t{1}));
}

double BinaryMask::mean() const {
  return static_cast<double>(count_ones()) / static_cast<double>(size());
}

}  // namespace avp
