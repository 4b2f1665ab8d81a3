#pragma once

#include <functional>

#include "avp/tensor.hpp"

namespace avp {

// Bilinear footprint of one sample point after clamp-to-edge.
struct BilinearTap {
  int y0 = 0, y1 = 0, x0 = 0, x1 = 0;
  double fy = 0.0, fx = 0.0;
  // True when the raw coordinate lay outside [0, size - 1] on that axis; the
  // sample is then insensitive to the displacement along it.
  bool clamped_y = false, clamped_x = false;
};

BilinearTap bilinear_tap(double sample_y, double sample_x, int height, int width);

// Backward warp: out(p, c) = bilinear sample of src at p + motion(p).
FeatureMap warp(const FeatureMap& src, const MotionField& motion);

struct WarpGradients {
  FeatureMap grad_src;
  MotionField grad_motion;
};

// Vector-Jacobian product of warp for an upstream gradient `grad_out`.
WarpGradients warp_backward(const FeatureMap& src, const MotionField& motion,
                            const FeatureMap& grad_out);

// Nearest-neighbour resize with src = floor((dst + 0.5) * src_size / dst_size).
BinaryMask resize_mask_nearest(const BinaryMask& mask, int new_height, int new_width);

// out(p, c) = w_a(p) * a(p, c) + w_b(p) * b(p, c).
FeatureMap elementwise_blend(const FeatureMap& a, const FeatureMap& b,
                             const ScalarPlane& w_a, const ScalarPlane& w_b);

struct BlendGradients {
  FeatureMap grad_a;
  FeatureMap grad_b;
  ScalarPlane grad_w_a;
  ScalarPlane grad_w_b;
};

BlendGradients blend_backward(const FeatureMap& a, const FeatureMap& b,
                              const ScalarPlane& w_a, const ScalarPlane& w_b,
                              const FeatureMap& grad_out);

// Changes the grid of a motion field. Displacements are rescaled to the new
// pixel units (halving the grid halves the displacement).
using MotionResampler = std::function<MotionField(const MotionField&, int, int)>;

// Default resampler: bilinear at half-pixel centres.
MotionField resample_motion_bilinear(const MotionField& motion, int new_height,
                                     int new_width);

}  // namespace avp
