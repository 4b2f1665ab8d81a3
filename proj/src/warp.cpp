#include "avp/warp.hpp"

#include <algorithm>
#include <cmath>

namespace avp {
namespace {

constexpr double kWeightSumTolerance = 1e-6;

struct AxisTap {
  int lo = 0;
  int hi = 0;
  double frac = 0.0;
  bool clamped = false;
};

AxisTap axis_tap(double s, int size) {
  AxisTap tap;
  const double top = static_cast<double>(size - 1);
  if (s <= 0.0) {
    tap.clamped = s < 0.0;
    s = 0.0;
  } else if (s >= top) {
    tap.clamped = s > top;
    s = top;
  }
  tap.lo = static_cast<int>(std::floor(s));
  tap.hi = std::min(tap.lo + 1, size - 1);
  tap.frac = s - static_cast<double>(tap.lo);
  return tap;
}

void check_warp_inputs(const FeatureMap& src, const MotionField& motion) {
  require(!src.empty(), "warp: empty source");
  require(src.same_grid(motion.height(), motion.width()),
          "warp: motion grid must match feature grid");
  require(motion.all_finite(), "warp: non-finite displacement");
}

}  // namespace

BilinearTap bilinear_tap(double sample_y, double sample_x, int height, int width) {
  const AxisTap ty = axis_tap(sample_y, height);
  const AxisTap tx = axis_tap(sample_x, width);
  return {ty.lo, ty.hi, tx.lo, tx.hi, ty.frac, tx.frac, ty.clamped, tx.clamped};
}

FeatureMap warp(const FeatureMap& src, const MotionField& motion) {
  check_warp_inputs(src, motion);
  const int h = src.height(), w = src.width(), channels = src.channels();
  FeatureMap out(h, w, channels);
  out.set_layer_id(src.layer_id());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const BilinearTap t = bilinear_tap(y + motion.dy(y, x), x + motion.dx(y, x), h, w);
      const auto v00 = src.pixel(t.y0, t.x0), v01 = src.pixel(t.y0, t.x1);
      const auto v10 = src.pixel(t.y1, t.x0), v11 = src.pixel(t.y1, t.x1);
      auto dst = out.pixel(y, x);
      // std::lerp keeps exactness at the endpoints and for constant inputs.
      for (int c = 0; c < channels; ++c) {
        const double top = std::lerp(v00[c], v01[c], t.fx);
        const double bottom = std::lerp(v10[c], v11[c], t.fx);
        dst[c] = std::lerp(top, bottom, t.fy);
      }
    }
  }
  return out;
}

WarpGradients warp_backward(const FeatureMap& src, const MotionField& motion,
                            const FeatureMap& grad_out) {
  check_warp_inputs(src, motion);
  require(grad_out.same_shape(src), "warp_backward: gradient shape mismatch");
  const int h = src.height(), w = src.width(), channels = src.channels();
  WarpGradients g{FeatureMap(h, w, channels), MotionField(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const BilinearTap t = bilinear_tap(y + motion.dy(y, x), x + motion.dx(y, x), h, w);
      const double w00 = (1.0 - t.fy) * (1.0 - t.fx), w01 = (1.0 - t.fy) * t.fx;
      const double w10 = t.fy * (1.0 - t.fx), w11 = t.fy * t.fx;
      double d_fy = 0.0, d_fx = 0.0;
      const auto go = grad_out.pixel(y, x);
      for (int c = 0; c < channels; ++c) {
        const double v00 = src.at(t.y0, t.x0, c), v01 = src.at(t.y0, t.x1, c);
        const double v10 = src.at(t.y1, t.x0, c), v11 = src.at(t.y1, t.x1, c);
        g.grad_src.at(t.y0, t.x0, c) += w00 * go[c];
        g.grad_src.at(t.y0, t.x1, c) += w01 * go[c];
        g.grad_src.at(t.y1, t.x0, c) += w10 * go[c];
        g.grad_src.at(t.y1, t.x1, c) += w11 * go[c];
        const double top = v00 + t.fx * (v01 - v00);
        const double bottom = v10 + t.fx * (v11 - v10);
        d_fy += go[c] * (bottom - top);
        d_fx += go[c] * ((1.0 - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
      }
      g.grad_motion.set(y, x, t.clamped_y ? 0.0 : d_fy, t.clamped_x ? 0.0 : d_fx);
    }
  }
  return g;
}

BinaryMask resize_mask_nearest(const BinaryMask& mask, int new_height, int new_width) {
  require(new_height > 0 && new_width > 0, "resize_mask_nearest: zero target dimension");
  const long long sh = mask.height(), sw = mask.width();
  BinaryMask out(new_height, new_width);
  for (int y = 0; y < new_height; ++y) {
    // floor((dst + 0.5) * src / dst) in exact integer arithmetic.
    const auto sy = std::min<long long>((2LL * y + 1) * sh / (2LL * new_height), sh - 1);
    for (int x = 0; x < new_width; ++x) {
      const auto sx = std::min<long long>((2LL * x + 1) * sw / (2LL * new_width), sw - 1);
      out.at(y, x) = mask.at(static_cast<int>(sy), static_cast<int>(sx));
    }
  }
  return out;
}

FeatureMap elementwise_blend(const FeatureMap& a, const FeatureMap& b,
                             const ScalarPlane& w_a, const ScalarPlane& w_b) {
  require(a.same_shape(b), "elementwise_blend: feature shapes differ");
  require(w_a.same_grid(a.height(), a.width()) && w_b.same_grid(a.height(), a.width()),
          "elementwise_blend: weight grid mismatch");
  FeatureMap out(a.height(), a.width(), a.channels());
  out.set_layer_id(a.layer_id());
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      const double wa = w_a.at(y, x), wb = w_b.at(y, x);
      require(std::abs(wa + wb - 1.0) <= kWeightSumTolerance,
              "elementwise_blend: weights must sum to 1");
      const auto pa = a.pixel(y, x), pb = b.pixel(y, x);
      auto po = out.pixel(y, x);
      for (int c = 0; c < a.channels(); ++c) po[c] = wa * pa[c] + wb * pb[c];
    }
  }
  return out;
}

BlendGradients blend_backward(const FeatureMap& a, const FeatureMap& b,
                              const ScalarPlane& w_a, const ScalarPlane& w_b,
                              const FeatureMap& grad_out) {
  require(a.same_shape(b) && grad_out.same_shape(a), "blend_backward: shape mismatch");
  const int h = a.height(), w = a.width();
  require(w_a.same_grid(h, w) && w_b.same_grid(h, w), "blend_backward: weight grid mismatch");
  BlendGradients g{FeatureMap(h, w, a.channels()), FeatureMap(h, w, a.channels()),
                   ScalarPlane(h, w), ScalarPlane(h, w)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto go = grad_out.pixel(y, x);
      const auto pa = a.pixel(y, x), pb = b.pixel(y, x);
      auto ga = g.grad_a.pixel(y, x), gb = g.grad_b.pixel(y, x);
      double swa = 0.0, swb = 0.0;
      for (int c = 0; c < a.channels(); ++c) {
        ga[c] = w_a.at(y, x) * go[c];
        gb[c] = w_b.at(y, x) * go[c];
        swa += go[c] * pa[c];
        swb += go[c] * pb[c];
      }
      g.grad_w_a.at(y, x) = swa;
      g.grad_w_b.at(y, x) = swb;
    }
  }
  return g;
}

MotionField resample_motion_bilinear(const MotionField& motion, int new_height,
                                     int new_width) {
  require(new_height > 0 && new_width > 0, "resample_motion: zero target dimension");
  require(motion.all_finite(), "resample_motion: non-finite displacement");
  const int sh = motion.height(), sw = motion.width();
  if (sh == new_height && sw == new_width) return motion;
  const double ry = static_cast<double>(sh) / new_height;
  const double rx = static_cast<double>(sw) / new_width;
  MotionField out(new_height, new_width);
  for (int y = 0; y < new_height; ++y) {
    for (int x = 0; x < new_width; ++x) {
      const BilinearTap t = bilinear_tap((y + 0.5) * ry - 0.5, (x + 0.5) * rx - 0.5, sh, sw);
      auto sample = [&](auto get) {
        const double top = std::lerp(get(t.y0, t.x0), get(t.y0, t.x1), t.fx);
        const double bottom = std::lerp(get(t.y1, t.x0), get(t.y1, t.x1), t.fx);
        return std::lerp(top, bottom, t.fy);
      };
      const double dy = sample([&](int yy, int xx) { return motion.dy(yy, xx); });
      const double dx = sample([&](int yy, int xx) { return motion.dx(yy, xx); });
      out.set(y, x, dy / ry, dx / rx);
    }
  }
  return out;
}

}  // namespace avp
