#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace avp {

// Thrown when a caller breaks an operation's preconditions (mismatched grids,
// non-finite inputs, empty windows, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Throws ContractViolation with `what` unless `cond` holds.
inline void require(bool cond, const std::string& what) {
  if (!cond) throw ContractViolation(what);
}

// Dense H x W x C tensor of doubles stored row-major in (y, x, c) order.
// Used for images, per-layer feature maps and embeddings alike.
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(int height, int width, int channels, double fill = 0.0);
  FeatureMap(int height, int width, int channels, std::vector<double> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t positions() const {
    return static_cast<std::size_t>(height_) * static_cast<std::size_t>(width_);
  }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<double> pixel(int y, int x) {
    return {data_.data() + index(y, x, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<const double> pixel(int y, int x) const {
    return {data_.data() + index(y, x, 0), static_cast<std::size_t>(channels_)};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  std::optional<int> layer_id() const { return layer_id_; }
  void set_layer_id(std::optional<int> id) { layer_id_ = id; }

  bool same_grid(int height, int width) const {
    return height_ == height && width_ == width;
  }
  bool same_shape(const FeatureMap& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  bool all_finite() const;
  double min() const;
  double max() const;

  // Exact comparison of shape and values; layer_id is metadata and ignored.
  friend bool operator==(const FeatureMap& a, const FeatureMap& b) {
    return a.same_shape(b) && a.data_ == b.data_;
  }

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels_) +
           static_cast<std::size_t>(c);
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
  std::optional<int> layer_id_;
};

// Input frames share the tensor layout of feature maps (3 channels, [0, 1]).
using Image = FeatureMap;

// One value per grid position.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(int height, int width, T fill = T{})
      : height_(height),
        width_(width),
        values_(static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
                fill) {
    require(height > 0 && width > 0, "Plane: dimensions must be positive");
  }
  Plane(int height, int width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    require(height > 0 && width > 0, "Plane: dimensions must be positive");
    require(values_.size() ==
                static_cast<std::size_t>(height) * static_cast<std::size_t>(width),
            "Plane: value count does not match dimensions");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return values_.size(); }

  T& at(int y, int x) { return values_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& at(int y, int x) const {
    return values_[static_cast<std::size_t>(y) * width_ + x];
  }

  std::span<T> values() { return values_; }
  std::span<const T> values() const { return values_; }

  bool same_grid(int height, int width) const {
    return height_ == height && width_ == width;
  }

  friend bool operator==(const Plane& a, const Plane& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.values_ == b.values_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

using ScalarPlane = Plane<double>;

// Backward displacement field: position p of frame i samples frame k at
// p + (dy, dx). Units are pixels of the grid the field is defined on.
class MotionField {
 public:
  MotionField() = default;
  MotionField(int height, int width, double dy = 0.0, double dx = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }

  double dy(int y, int x) const { return disp_[offset(y, x)]; }
  double dx(int y, int x) const { return disp_[offset(y, x) + 1]; }
  void set(int y, int x, double dy, double dx) {
    disp_[offset(y, x)] = dy;
    disp_[offset(y, x) + 1] = dx;
  }

  // Interleaved (dy, dx) pairs, row-major.
  std::span<double> data() { return disp_; }
  std::span<const double> data() const { return disp_; }

  bool all_finite() const;

  friend bool operator==(const MotionField& a, const MotionField& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.disp_ == b.disp_;
  }

 private:
  std::size_t offset(int y, int x) const {
    return 2 * (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
                static_cast<std::size_t>(x));
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> disp_;
};

// Recompute mask U: 1 where the feature must be recomputed.
class BinaryMask : public Plane<std::uint8_t> {
 public:
  using Plane<std::uint8_t>::Plane;

  std::size_t count_ones() const;
  double mean() const;
};

// Propagation quality Q. Values may be exactly -inf / +inf (full recompute /
// pure propagation sentinels).
class QualityMap : public Plane<double> {
 public:
  using Plane<double>::Plane;

  static QualityMap filled(int height, int width, double value) {
    return QualityMap(height, width, value);
  }
};

// Normalized per-position weight of one aggregation source.
class WeightMap : public Plane<double> {
 public:
  using Plane<double>::Plane;
  explicit WeightMap(Plane<double> plane) : Plane<double>(std::move(plane)) {}
};

}  // namespace avp
