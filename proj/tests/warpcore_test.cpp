#include <gtest/gtest.h>

#include <sstream>

#include "avp/tensor_io.hpp"
#include "avp/warp.hpp"
#include "support.hpp"

namespace avp {
namespace {

using test::random_map;
using test::random_motion;

TEST(Warp, ZeroMotionIsIdentity) {
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const FeatureMap src = random_map(rng, rng.uniform_int(1, 9), rng.uniform_int(1, 9), rng.uniform_int(1, 4));
    EXPECT_EQ(warp(src, MotionField(src.height(), src.width())), src);
  }
}

TEST(Warp, RampShiftedByOnePixelClampsAtEdge) {
  FeatureMap src(4, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) src.at(y, x, 0) = x;
  const FeatureMap out = warp(src, MotionField(4, 4, 0.0, 1.0));
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(out.at(y, x, 0), std::min(x + 1, 3));
}

TEST(Warp, HalfPixelOnLinearRamp) {
  FeatureMap src(1, 8, 1);
  for (int x = 0; x < 8; ++x) src.at(0, x, 0) = x;
  const FeatureMap out = warp(src, MotionField(1, 8, 0.0, 0.5));
  for (int x = 0; x < 7; ++x) EXPECT_DOUBLE_EQ(out.at(0, x, 0), x + 0.5);
  EXPECT_EQ(out.at(0, 7, 0), 7.0);
}

TEST(Warp, MatchesScalarBilinearOracle) {
  Rng rng(2);
  for (int k = 0; k < 200; ++k) {
    const int h = rng.uniform_int(1, 10), w = rng.uniform_int(1, 10);
    const FeatureMap src = random_map(rng, h, w, rng.uniform_int(1, 4), -5.0, 5.0);
    const MotionField m = random_motion(rng, h, w, 4.0);
    const FeatureMap got = warp(src, m), want = test::scalar_warp(src, m);
    for (std::size_t n = 0; n < got.size(); ++n) ASSERT_NEAR(got.data()[n], want.data()[n], 1e-12);
  }
}

TEST(Warp, ConstantMapStaysConstant) {
  Rng rng(3);
  for (int k = 0; k < 100; ++k) {
    const int h = rng.uniform_int(1, 8), w = rng.uniform_int(1, 8);
    const double v = rng.uniform(-3.0, 3.0);
    const FeatureMap src(h, w, 2, v);
    EXPECT_EQ(warp(src, random_motion(rng, h, w, 10.0)), src);
  }
}

TEST(Warp, OutputInsideChannelRange) {
  Rng rng(4);
  for (int k = 0; k < 100; ++k) {
    const int h = rng.uniform_int(1, 8), w = rng.uniform_int(1, 8), c = rng.uniform_int(1, 3);
    const FeatureMap src = random_map(rng, h, w, c);
    const FeatureMap out = warp(src, random_motion(rng, h, w, 6.0));
    for (int ch = 0; ch < c; ++ch) {
      double lo = 1e9, hi = -1e9;
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          lo = std::min(lo, src.at(y, x, ch));
          hi = std::max(hi, src.at(y, x, ch));
        }
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          EXPECT_GE(out.at(y, x, ch), lo);
          EXPECT_LE(out.at(y, x, ch), hi);
        }
    }
  }
}

TEST(Warp, RejectsBadInputs) {
  const FeatureMap src(3, 3, 1, 1.0);
  EXPECT_THROW(warp(src, MotionField(3, 4)), ContractViolation);
  MotionField nan(3, 3);
  nan.set(1, 1, std::nan(""), 0.0);
  EXPECT_THROW(warp(src, nan), ContractViolation);
  EXPECT_THROW(warp(FeatureMap(), MotionField()), ContractViolation);
}

TEST(Warp, KeepsLayerId) {
  FeatureMap src(2, 2, 1, 1.0);
  src.set_layer_id(2);
  EXPECT_EQ(warp(src, MotionField(2, 2)).layer_id(), 2);
}

TEST(ResizeMask, UpscaleBlocks) {
  BinaryMask m(2, 2, std::vector<std::uint8_t>{1, 0, 0, 1});
  const BinaryMask out = resize_mask_nearest(m, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(out.at(y, x), (y / 2 == x / 2) ? 1 : 0);
}

TEST(ResizeMask, SameSizeAndAllOnes) {
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    const int h = rng.uniform_int(1, 9), w = rng.uniform_int(1, 9);
    BinaryMask m(h, w);
    for (auto& v : m.values()) v = rng.bernoulli(0.5) ? 1 : 0;
    EXPECT_EQ(resize_mask_nearest(m, h, w), m);
    const BinaryMask ones(h, w, 1);
    const BinaryMask up = resize_mask_nearest(ones, rng.uniform_int(1, 12), rng.uniform_int(1, 12));
    EXPECT_EQ(up.count_ones(), up.size());
  }
}

TEST(ResizeMask, MatchesHalfPixelCentreFormula) {
  Rng rng(6);
  for (int k = 0; k < 100; ++k) {
    const int sh = rng.uniform_int(1, 9), sw = rng.uniform_int(1, 9);
    const int dh = rng.uniform_int(1, 17), dw = rng.uniform_int(1, 17);
    BinaryMask m(sh, sw);
    for (auto& v : m.values()) v = rng.bernoulli(0.4) ? 1 : 0;
    const BinaryMask out = resize_mask_nearest(m, dh, dw);
    for (int y = 0; y < dh; ++y)
      for (int x = 0; x < dw; ++x) {
        const int sy = std::min(static_cast<int>(std::floor((y + 0.5) * sh / dh)), sh - 1);
        const int sx = std::min(static_cast<int>(std::floor((x + 0.5) * sw / dw)), sw - 1);
        ASSERT_EQ(out.at(y, x), m.at(sy, sx));
        ASSERT_LE(out.at(y, x), 1);
      }
    EXPECT_EQ(resize_mask_nearest(out, dh, dw), out);
  }
  EXPECT_THROW(resize_mask_nearest(BinaryMask(2, 2), 0, 3), ContractViolation);
}

TEST(Blend, DegenerateAndMidpoint) {
  Rng rng(7);
  const FeatureMap a = random_map(rng, 3, 4, 2), b = random_map(rng, 3, 4, 2);
  EXPECT_EQ(elementwise_blend(a, b, ScalarPlane(3, 4, 1.0), ScalarPlane(3, 4, 0.0)), a);
  const FeatureMap two(3, 4, 2, 2.0), four(3, 4, 2, 4.0);
  EXPECT_EQ(elementwise_blend(two, four, ScalarPlane(3, 4, 0.5), ScalarPlane(3, 4, 0.5)),
            FeatureMap(3, 4, 2, 3.0));
}

TEST(Blend, MatchesScalarLoopAndIsLinear) {
  Rng rng(8);
  for (int k = 0; k < 30; ++k) {
    const int h = rng.uniform_int(1, 6), w = rng.uniform_int(1, 6), c = rng.uniform_int(1, 3);
    const FeatureMap a = random_map(rng, h, w, c), b = random_map(rng, h, w, c);
    const ScalarPlane wa(h, w, 0.25), wb(h, w, 0.75);
    const FeatureMap out = elementwise_blend(a, b, wa, wb);
    for (std::size_t n = 0; n < out.size(); ++n)
      EXPECT_EQ(out.data()[n], 0.25 * a.data()[n] + 0.75 * b.data()[n]);

    // Linear in a for fixed weights.
    const FeatureMap a2 = random_map(rng, h, w, c);
    FeatureMap sum(h, w, c);
    for (std::size_t n = 0; n < sum.size(); ++n) sum.data()[n] = a.data()[n] + a2.data()[n];
    const FeatureMap zero(h, w, c);
    const FeatureMap lhs = elementwise_blend(sum, b, wa, wb);
    const FeatureMap r1 = elementwise_blend(a, b, wa, wb), r2 = elementwise_blend(a2, zero, wa, wb);
    for (std::size_t n = 0; n < lhs.size(); ++n) EXPECT_NEAR(lhs.data()[n], r1.data()[n] + r2.data()[n], 1e-14);
  }
}

TEST(Blend, GradientWrtInputsIsTheWeights) {
  Rng rng(9);
  const FeatureMap a = random_map(rng, 2, 3, 2), b = random_map(rng, 2, 3, 2);
  ScalarPlane wa(2, 3), wb(2, 3);
  for (std::size_t n = 0; n < wa.size(); ++n) {
    wa.values()[n] = rng.uniform();
    wb.values()[n] = 1.0 - wa.values()[n];
  }
  const BlendGradients g = blend_backward(a, b, wa, wb, FeatureMap(2, 3, 2, 1.0));
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 3; ++x)
      for (int c = 0; c < 2; ++c) {
        EXPECT_EQ(g.grad_a.at(y, x, c), wa.at(y, x));
        EXPECT_EQ(g.grad_b.at(y, x, c), wb.at(y, x));
      }
}

TEST(Blend, RejectsWeightsNotSummingToOne) {
  const FeatureMap a(2, 2, 1, 1.0);
  EXPECT_THROW(elementwise_blend(a, a, ScalarPlane(2, 2, 0.5), ScalarPlane(2, 2, 0.6)), ContractViolation);
  EXPECT_THROW(elementwise_blend(a, FeatureMap(2, 3, 1), ScalarPlane(2, 2, 0.5), ScalarPlane(2, 2, 0.5)),
               ContractViolation);
}

TEST(ResampleMotion, HalvingGridHalvesUniformDisplacement) {
  const MotionField m(8, 8, 2.0, -1.0);
  const MotionField half = resample_motion_bilinear(m, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      EXPECT_EQ(half.dy(y, x), 1.0);
      EXPECT_EQ(half.dx(y, x), -0.5);
    }
  EXPECT_EQ(resample_motion_bilinear(m, 8, 8), m);
}

TEST(TensorIo, RoundTripsAllKinds) {
  Rng rng(10);
  const FeatureMap f = random_map(rng, 3, 5, 2);
  const MotionField m = random_motion(rng, 4, 2, 3.0);
  QualityMap q(2, 3);
  q.values()[0] = -INFINITY;
  q.values()[1] = INFINITY;
  q.values()[2] = 0.25;
  BinaryMask mask(2, 2, std::vector<std::uint8_t>{1, 0, 1, 1});

  auto round = [](const RawTensor& t) {
    std::stringstream s;
    write_raw_tensor(s, t);
    return read_raw_tensor(s);
  };
  EXPECT_EQ(feature_map_from_raw(round(to_raw(f))), f);
  EXPECT_EQ(motion_from_raw(round(to_raw(m))), m);
  EXPECT_EQ(quality_from_raw(round(to_raw(q))), q);
  EXPECT_EQ(mask_from_raw(round(to_raw(mask))), mask);
}

TEST(TensorIo, ByteLayout) {
  RawTensor t{{1, 2}, {1.0, -2.5}};
  std::stringstream s;
  write_raw_tensor(s, t);
  const std::string bytes = s.str();
  ASSERT_EQ(bytes.size(), 4u + 4u + 8u + 16u);
  EXPECT_EQ(bytes.substr(0, 4), "AVPT");
  const unsigned char expect_header[] = {2, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0};
  for (int i = 0; i < 12; ++i) EXPECT_EQ(static_cast<unsigned char>(bytes[4 + i]), expect_header[i]);
  // 1.0 = 0x3ff0000000000000, little-endian.
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + 7]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16 + 6]), 0xf0);
}

TEST(TensorIo, RejectsMalformedInput) {
  std::stringstream bad_magic("XXXX");
  EXPECT_THROW(read_raw_tensor(bad_magic), ContractViolation);
  RawTensor t{{2, 2}, {1.0, 2.0, 3.0, 4.0}};
  std::stringstream s;
  write_raw_tensor(s, t);
  std::string truncated = s.str();
  truncated.resize(truncated.size() - 3);
  std::stringstream ts(truncated);
  EXPECT_THROW(read_raw_tensor(ts), ContractViolation);
  EXPECT_THROW(write_raw_tensor(s, RawTensor{{3}, {1.0}}), ContractViolation);
  EXPECT_THROW(motion_from_raw(RawTensor{{2, 2, 3}, std::vector<double>(12)}), ContractViolation);
}

}  // namespace
}  // namespace avp
