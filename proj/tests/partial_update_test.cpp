#include <gtest/gtest.h>

#include <cmath>

#include "avp/partial_update.hpp"
#include "avp/toy_networks.hpp"
#include "support.hpp"

namespace avp {
namespace {

using test::random_map;
using test::random_motion;
constexpr double kInf = std::numeric_limits<double>::infinity();

TEST(UpdateMask, Sentinels) {
  const auto all = build_update_mask(QualityMap::filled(3, 4, -kInf), 0.0);
  EXPECT_EQ(all.mask.count_ones(), 12u);
  EXPECT_EQ(all.recompute_fraction, 1.0);
  const auto none = build_update_mask(QualityMap::filled(3, 4, kInf), 0.0);
  EXPECT_EQ(none.mask.count_ones(), 0u);
  EXPECT_EQ(none.recompute_fraction, 0.0);
}

TEST(UpdateMask, DirectThreshold) {
  const QualityMap q(2, 2, std::vector<double>{-0.5, 0.3, 0.0, 1.2});
  const auto d = build_update_mask(q, 0.0);
  EXPECT_EQ(d.mask, BinaryMask(2, 2, std::vector<std::uint8_t>{1, 0, 1, 0}));
  EXPECT_EQ(d.recompute_fraction, 0.5);
  QualityMap bad(1, 1, std::nan(""));
  EXPECT_THROW(build_update_mask(bad, 0.0), ContractViolation);
}

TEST(UpdateMask, MonotoneInTauAndFractionIsMean) {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    QualityMap q(rng.uniform_int(1, 8), rng.uniform_int(1, 8));
    for (double& v : q.values()) v = rng.uniform(-2.0, 2.0);
    const double t1 = rng.uniform(-2.0, 2.0), t2 = t1 + rng.uniform(0.0, 1.0);
    const auto a = build_update_mask(q, t1), b = build_update_mask(q, t2);
    for (std::size_t n = 0; n < q.size(); ++n) ASSERT_LE(a.mask.values()[n], b.mask.values()[n]);
    EXPECT_EQ(a.recompute_fraction, a.mask.mean());
  }
}

TEST(PartialUpdateLayer, AllOnesAllZerosCheckerboard) {
  Rng rng(2);
  const FeatureMap input = random_map(rng, 4, 4, 2), propagated = random_map(rng, 4, 4, 2);
  const LayerFn doubled = [](const FeatureMap& f) {
    FeatureMap out = f;
    for (double& v : out.data()) v *= 2.0;
    return out;
  };
  EXPECT_EQ(partial_update_layer(input, propagated, BinaryMask(4, 4, 1), doubled), doubled(input));
  EXPECT_EQ(partial_update_layer(input, propagated, BinaryMask(4, 4, 0), doubled), propagated);

  BinaryMask checker(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) checker.at(y, x) = (y + x) % 2;
  const FeatureMap out = partial_update_layer(input, propagated, checker, doubled);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 2; ++c)
        EXPECT_EQ(out.at(y, x, c), (y + x) % 2 ? 2.0 * input.at(y, x, c) : propagated.at(y, x, c));
  EXPECT_THROW(partial_update_layer(input, propagated, BinaryMask(2, 2), doubled), ContractViolation);
}

struct Fixture {
  ConvFeatureNet net;
  Image key_frame, frame;
  FeatureStack key_layers;
  MotionField motion;
};

Fixture make_fixture(ConvFeatureNet net, std::uint64_t seed) {
  Rng rng(seed);
  Fixture f{std::move(net), random_map(rng, 8, 8, 3, 0.0, 1.0), random_map(rng, 8, 8, 3, 0.0, 1.0), {}, {}};
  f.key_layers = f.net.forward(f.key_frame);
  f.motion = random_motion(rng, 8, 8, 1.5);
  return f;
}

TEST(PartialUpdate, MinusInfinityIsFullRecompute) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const Fixture f = make_fixture(ConvFeatureNet::reference(s), s);
    const auto r = partial_update(f.frame, f.key_layers, f.motion, QualityMap::filled(4, 4, -kInf), f.net, 0.0);
    const FeatureStack full = f.net.forward(f.frame);
    ASSERT_EQ(r.layers.size(), full.size());
    for (std::size_t n = 0; n < full.size(); ++n) EXPECT_EQ(r.layers[n], full[n]);
    EXPECT_EQ(r.recompute_fraction, 1.0);
  }
}

TEST(PartialUpdate, PlusInfinityIsPurePropagation) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const Fixture f = make_fixture(ConvFeatureNet::reference(s), s);
    const auto r = partial_update(f.frame, f.key_layers, f.motion, QualityMap::filled(4, 4, kInf), f.net, 0.0);
    for (std::size_t n = 0; n < f.key_layers.size(); ++n) {
      const FeatureMap& k = f.key_layers[n];
      EXPECT_EQ(r.layers[n], warp(k, resample_motion_bilinear(f.motion, k.height(), k.width())));
    }
    EXPECT_EQ(r.recompute_fraction, 0.0);
  }
}

TEST(PartialUpdate, PointwiseLayersMatchRecomputeThenBlend) {
  for (std::uint64_t s = 1; s <= 20; ++s) {
    const Fixture f = make_fixture(ConvFeatureNet::pointwise(s), s);
    Rng rng(100 + s);
    QualityMap q(4, 4);
    const bool half_plane = s % 2 == 0;
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) q.at(y, x) = half_plane ? (x < 2 ? -1.0 : 1.0) : rng.uniform(-1.0, 1.0);
    const auto r = partial_update(f.frame, f.key_layers, f.motion, q, f.net, 0.0);

    const FeatureMap full = f.net.features(f.frame);
    const FeatureMap& k = f.key_layers.back();
    const FeatureMap propagated = warp(k, resample_motion_bilinear(f.motion, 4, 4));
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        for (int c = 0; c < full.channels(); ++c)
          ASSERT_EQ(r.layers.back().at(y, x, c), q.at(y, x) <= 0.0 ? full.at(y, x, c) : propagated.at(y, x, c));
  }
}

// Stencil layers read neighbours from the partially updated previous layer,
// so the result differs from recompute-then-blend near mask boundaries. The
// gap is bounded by the tanh range and vanishes away from the boundary.
TEST(PartialUpdate, StencilLeakageIsConfinedToMaskBoundary) {
  double worst_boundary = 0.0;
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const Fixture f = make_fixture(ConvFeatureNet::reference(s), s);
    QualityMap q(4, 4);
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) q.at(y, x) = x < 2 ? -1.0 : 1.0;
    const auto r = partial_update(f.frame, f.key_layers, f.motion, q, f.net, 0.0);
    const FeatureMap full = f.net.features(f.frame);
    const FeatureMap propagated =
        warp(f.key_layers.back(), resample_motion_bilinear(f.motion, 4, 4));
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        for (int c = 0; c < full.channels(); ++c) {
          const double oracle = x < 2 ? full.at(y, x, c) : propagated.at(y, x, c);
          const double gap = std::abs(r.layers.back().at(y, x, c) - oracle);
          if (x >= 2) ASSERT_EQ(gap, 0.0);  // propagated side is copied as is
          if (x == 0) ASSERT_EQ(gap, 0.0);  // receptive field entirely recomputed
          worst_boundary = std::max(worst_boundary, gap);
        }
  }
  RecordProperty("max_boundary_gap", std::to_string(worst_boundary));
  EXPECT_GT(worst_boundary, 0.0);
  EXPECT_LT(worst_boundary, 2.0);
}

TEST(PartialUpdate, LayerFractionsFollowResizedMask) {
  const Fixture f = make_fixture(ConvFeatureNet::reference(3), 3);
  QualityMap q(4, 4, 1.0);
  q.at(0, 0) = -1.0;
  const auto r = partial_update(f.frame, f.key_layers, f.motion, q, f.net, 0.0);
  EXPECT_EQ(r.recompute_fraction, 1.0 / 16.0);
  ASSERT_EQ(r.layer_fractions.size(), 3u);
  for (double v : r.layer_fractions) EXPECT_DOUBLE_EQ(v, 1.0 / 16.0);
}

TEST(PartialUpdate, RejectsMismatchedInputs) {
  const Fixture f = make_fixture(ConvFeatureNet::reference(1), 1);
  EXPECT_THROW(partial_update(f.frame, f.key_layers, f.motion, QualityMap(8, 8), f.net, 0.0), ContractViolation);
  FeatureStack shallow(f.key_layers.begin(), f.key_layers.end() - 1);
  EXPECT_THROW(partial_update(f.frame, shallow, f.motion, QualityMap(4, 4), f.net, 0.0), ContractViolation);
}

TEST(Ste, Examples) {
  EXPECT_EQ(ste_gradient(0.5, 0.0), -1.0);
  EXPECT_EQ(ste_gradient(2.0, 0.0), 0.0);
  EXPECT_EQ(ste_gradient(1.0, 0.0), -1.0);
  EXPECT_EQ(ste_gradient(-1.0, 0.0), -1.0);
  EXPECT_EQ(ste_gradient(kInf, 0.0), 0.0);
  EXPECT_EQ(ste_gradient(-kInf, 0.0), 0.0);
}

TEST(Ste, PiecewiseOnDenseSamples) {
  Rng rng(4);
  for (int k = 0; k < 10000; ++k) {
    const double tau = rng.uniform(-3.0, 3.0), q = rng.uniform(-6.0, 6.0);
    ASSERT_EQ(ste_gradient(q, tau), std::abs(q - tau) <= 1.0 ? -1.0 : 0.0);
  }
}

}  // namespace
}  // namespace avp
