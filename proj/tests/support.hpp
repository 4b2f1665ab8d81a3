#pragma once

// Shared fixtures and brute-force oracles for the test binaries.

#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include "avp/rng.hpp"
#include "avp/synthetic.hpp"
#include "avp/tensor.hpp"
#include "avp/train.hpp"

namespace avp::test {

inline FeatureMap random_map(Rng& rng, int h, int w, int c, double lo = -1.0, double hi = 1.0) {
  FeatureMap m(h, w, c);
  for (double& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

inline MotionField random_motion(Rng& rng, int h, int w, double scale) {
  MotionField m(h, w);
  for (double& v : m.data()) v = rng.uniform(-scale, scale);
  return m;
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Per-pixel bilinear sampler written from the textbook formula, with clamping.
inline double scalar_bilinear(const FeatureMap& src, double sy, double sx, int c) {
  const int h = src.height(), w = src.width();
  sy = std::clamp(sy, 0.0, static_cast<double>(h - 1));
  sx = std::clamp(sx, 0.0, static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
  const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
  const double fy = sy - y0, fx = sx - x0;
  return (1 - fy) * (1 - fx) * src.at(y0, x0, c) + (1 - fy) * fx * src.at(y0, x1, c) +
         fy * (1 - fx) * src.at(y1, x0, c) + fy * fx * src.at(y1, x1, c);
}

inline FeatureMap scalar_warp(const FeatureMap& src, const MotionField& motion) {
  FeatureMap out(src.height(), src.width(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c)
        out.at(y, x, c) = scalar_bilinear(src, y + motion.dy(y, x), x + motion.dx(y, x), c);
  return out;
}

// Small deteriorated sequence used by the degeneracy fixtures.
inline GeneratorSpec small_fixture_spec() {
  GeneratorSpec s;
  s.height = 16;
  s.width = 16;
  s.frames = 30;
  s.initial_objects = 2;
  s.max_objects = 3;
  s.min_object_size = 4.0;
  s.max_object_size = 7.0;
  s.max_speed = 0.8;
  s.blur_rate = 0.1;
  s.fast_rate = 0.05;
  s.spawn_rate = 0.05;
  s.despawn_rate = 0.02;
  s.noise_sigma = 0.01;
  return s;
}

// Reference model with a random (untrained) detector so that detections are
// not empty.
inline ToyModel fixture_model(std::uint64_t seed) {
  ToyModel m = ToyModel::reference(seed);
  Rng rng(derive_seed(seed, 99));
  DetectorParams p = DetectorParams::zeros(m.feature->out_channels());
  for (double& v : p.objectness_w) v = rng.normal(0.0, 1.0);
  for (double& v : p.box_w) v = rng.normal(0.0, 0.5);
  for (double& v : p.box_b) v = 1.0 + rng.uniform();
  m.detector = LinearDetector(p, 2.0);
  return m;
}

}  // namespace avp::test
