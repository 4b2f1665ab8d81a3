#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "avp/aggregate.hpp"
#include "avp/tensor_io.hpp"
#include "support.hpp"

namespace avp {
namespace {

using test::random_map;
constexpr double kE = std::numbers::e;

EmbeddingMap as_embedding(const FeatureMap& f) { return EmbeddingMap(f); }

TEST(Embed, IdentityProjectorCopies) {
  Rng rng(1);
  const FeatureMap f = random_map(rng, 3, 4, 5);
  EXPECT_EQ(static_cast<const FeatureMap&>(Embedder::identity(5).embed(f)), f);
}

TEST(Embed, ZeroFeatureGivesZeroEmbedding) {
  const EmbeddingMap e = Embedder::seeded(6, 8, 3).embed(FeatureMap(2, 2, 6));
  for (double v : e.data()) EXPECT_EQ(v, 0.0);
  // Zero embeddings are guarded by the norm floor and still give a weight.
  EXPECT_EQ(exp_cosine(e.pixel(0, 0), e.pixel(1, 1)), 1.0);
}

TEST(Embed, MatchesGoldenFixture) {
  const FeatureMap input = feature_map_from_raw(load_tensor(AVP_FIXTURE_DIR "/embed_input.avpt"));
  const FeatureMap golden = feature_map_from_raw(load_tensor(AVP_FIXTURE_DIR "/embed_golden.avpt"));
  const EmbeddingMap got = Embedder::seeded(8, 8, 42).embed(input);
  EXPECT_EQ(static_cast<const FeatureMap&>(got), golden);
}

TEST(Embed, OffsetIsSubtractedFirst) {
  const Embedder e = Embedder::identity(2).with_offset({1.0, -1.0});
  const EmbeddingMap out = e.embed(FeatureMap(1, 1, 2, 1.0));
  EXPECT_EQ(out.at(0, 0, 0), 0.0);
  EXPECT_EQ(out.at(0, 0, 1), 2.0);
  EXPECT_THROW(e.with_offset({1.0}), ContractViolation);
}

TEST(Similarity, IdenticalOrthogonalOpposite) {
  FeatureMap u(1, 3, 2), v(1, 3, 2);
  u.at(0, 0, 0) = 1.0; v.at(0, 0, 0) = 1.0;        // identical
  u.at(0, 1, 0) = 1.0; v.at(0, 1, 1) = 2.0;        // orthogonal
  u.at(0, 2, 1) = 3.0; v.at(0, 2, 1) = -0.5;       // opposite
  const ScalarPlane w = similarity_weights(as_embedding(u), as_embedding(v));
  EXPECT_DOUBLE_EQ(w.at(0, 0), kE);
  EXPECT_DOUBLE_EQ(w.at(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(w.at(0, 2), 1.0 / kE);
}

TEST(Normalize, SingleSourceAndSymmetry) {
  Rng rng(2);
  ScalarPlane raw(3, 3);
  for (double& v : raw.values()) v = rng.uniform(0.1, 3.0);
  const auto one = normalize_weights(std::vector<ScalarPlane>{raw});
  for (double v : one[0].values()) EXPECT_EQ(v, 1.0);
  const auto two = normalize_weights(std::vector<ScalarPlane>{raw, raw});
  for (std::size_t n = 0; n < raw.size(); ++n) {
    EXPECT_EQ(two[0].values()[n], 0.5);
    EXPECT_EQ(two[1].values()[n], 0.5);
  }
}

TEST(Normalize, TwoSourceClosedForm) {
  const auto w = normalize_weights(std::vector<ScalarPlane>{ScalarPlane(2, 2, std::exp(1.0)), ScalarPlane(2, 2, 1.0)});
  for (std::size_t n = 0; n < 4; ++n) {
    EXPECT_NEAR(w[0].values()[n], kE / (kE + 1.0), 1e-12);
    EXPECT_NEAR(w[1].values()[n], 1.0 / (kE + 1.0), 1e-12);
  }
  EXPECT_NEAR(kE / (kE + 1.0), 0.731059, 1e-6);
}

TEST(Normalize, ProbabilityVectorAndScaleInvariance) {
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const int sources = rng.uniform_int(1, 7);
    std::vector<ScalarPlane> raw, scaled;
    const double s = std::exp(rng.uniform(-5.0, 5.0));
    for (int j = 0; j < sources; ++j) {
      ScalarPlane p(2, 3);
      for (double& v : p.values()) v = std::exp(rng.uniform(-1.0, 1.0));
      ScalarPlane q = p;
      for (double& v : q.values()) v *= s;
      raw.push_back(p);
      scaled.push_back(q);
    }
    const auto w = normalize_weights(raw), ws = normalize_weights(scaled);
    for (std::size_t n = 0; n < 6; ++n) {
      double sum = 0.0;
      for (int j = 0; j < sources; ++j) {
        ASSERT_GE(w[j].values()[n], 0.0);
        ASSERT_NEAR(w[j].values()[n], ws[j].values()[n], 1e-12);
        sum += w[j].values()[n];
      }
      ASSERT_NEAR(sum, 1.0, 1e-6);
    }
  }
}

TEST(Normalize, RejectsBadRaw) {
  EXPECT_THROW(normalize_weights(std::vector<ScalarPlane>{}), ContractViolation);
  EXPECT_THROW(normalize_weights(std::vector<ScalarPlane>{ScalarPlane(1, 1, 0.0)}), ContractViolation);
  EXPECT_THROW(normalize_weights(std::vector<ScalarPlane>{ScalarPlane(1, 1, 1.0), ScalarPlane(1, 2, 1.0)}),
               ContractViolation);
}

TEST(Dense, SingleEntryWindowIsIdentity) {
  Rng rng(4);
  const FeatureMap f = random_map(rng, 3, 3, 4);
  const std::vector<WindowEntry> window{{5, f}};
  EXPECT_EQ(aggregate_dense(5, window, Embedder::seeded(4, 8, 1)), f);
}

TEST(Dense, EqualInputsGiveThatInput) {
  Rng rng(5);
  const FeatureMap f = random_map(rng, 2, 2, 3);
  const std::vector<WindowEntry> window{{0, f}, {1, f}, {2, f}};
  const FeatureMap out = aggregate_dense(1, window, Embedder::seeded(3, 8, 2));
  for (std::size_t n = 0; n < f.size(); ++n) EXPECT_NEAR(out.data()[n], f.data()[n], 1e-15);
}

TEST(Dense, ThreeFrameWindowMatchesScalarOracle) {
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const Embedder emb = Embedder::seeded(3, 8, rng.next_u64());
    std::vector<WindowEntry> window;
    for (int j = 0; j < 3; ++j) window.push_back({10 + j, random_map(rng, 2, 2, 3)});
    const FeatureMap out = aggregate_dense(11, window, emb);
    const EmbeddingMap e_ref = emb.embed(window[1].feature);
    for (int y = 0; y < 2; ++y)
      for (int x = 0; x < 2; ++x) {
        double raw[3], sum = 0.0;
        for (int j = 0; j < 3; ++j) {
          const EmbeddingMap e = emb.embed(window[j].feature);
          double dot = 0, uu = 0, vv = 0;
          for (int d = 0; d < 8; ++d) {
            dot += e.at(y, x, d) * e_ref.at(y, x, d);
            uu += e.at(y, x, d) * e.at(y, x, d);
            vv += e_ref.at(y, x, d) * e_ref.at(y, x, d);
          }
          raw[j] = std::exp(dot / std::sqrt(uu * vv));
          sum += raw[j];
        }
        for (int c = 0; c < 3; ++c) {
          double want = 0.0;
          for (int j = 0; j < 3; ++j) want += raw[j] / sum * window[j].feature.at(y, x, c);
          EXPECT_NEAR(out.at(y, x, c), want, 1e-12);
        }
      }
  }
}

TEST(Dense, RequiresReferenceInWindow) {
  const std::vector<WindowEntry> window{{0, FeatureMap(1, 1, 1)}};
  EXPECT_THROW(aggregate_dense(3, window, Embedder::identity(1)), ContractViolation);
  EXPECT_THROW(aggregate_dense(0, std::vector<WindowEntry>{}, Embedder::identity(1)), ContractViolation);
}

TEST(Recursive, EqualInputsHalfHalf) {
  Rng rng(7);
  const FeatureMap f = random_map(rng, 3, 2, 4);
  const auto r = aggregate_recursive_detailed(f, f, Embedder::seeded(4, 8, 5));
  for (double v : r.weight_prev.values()) EXPECT_EQ(v, 0.5);
  for (std::size_t n = 0; n < f.size(); ++n) EXPECT_NEAR(r.output.data()[n], f.data()[n], 1e-15);
}

TEST(Recursive, OrthogonalPreviousClosedForm) {
  // Identity embedding: prev along channel 0, cur along channel 1.
  FeatureMap prev(2, 2, 2), cur(2, 2, 2);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      prev.at(y, x, 0) = 1.0 + y;
      cur.at(y, x, 1) = 2.0 + x;
    }
  const auto r = aggregate_recursive_detailed(prev, cur, Embedder::identity(2));
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 2; ++x) {
      EXPECT_NEAR(r.weight_prev.at(y, x), 1.0 / (kE + 1.0), 1e-12);
      EXPECT_NEAR(r.weight_cur.at(y, x), kE / (kE + 1.0), 1e-12);
      EXPECT_NEAR(r.output.at(y, x, 0), (1.0 + y) / (kE + 1.0), 1e-12);
      EXPECT_NEAR(r.output.at(y, x, 1), (2.0 + x) * kE / (kE + 1.0), 1e-12);
    }
}

TEST(Recursive, WeightsAreProbabilitiesAndOutputInHull) {
  Rng rng(8);
  for (int k = 0; k < 500; ++k) {
    const int c = rng.uniform_int(1, 6);
    const FeatureMap a = random_map(rng, 2, 3, c), b = random_map(rng, 2, 3, c);
    const auto r = aggregate_recursive_detailed(a, b, Embedder::seeded(c, 8, rng.next_u64()));
    for (std::size_t n = 0; n < 6; ++n) {
      ASSERT_GE(r.weight_prev.values()[n], 0.0);
      ASSERT_GE(r.weight_cur.values()[n], 0.0);
      ASSERT_NEAR(r.weight_prev.values()[n] + r.weight_cur.values()[n], 1.0, 1e-6);
    }
    for (std::size_t n = 0; n < a.size(); ++n) {
      ASSERT_GE(r.output.data()[n], std::min(a.data()[n], b.data()[n]) - 1e-15);
      ASSERT_LE(r.output.data()[n], std::max(a.data()[n], b.data()[n]) + 1e-15);
    }
  }
}

TEST(Recursive, ChainStaysWithinGlobalRange) {
  Rng rng(9);
  const Embedder emb = Embedder::seeded(3, 8, 11);
  FeatureMap agg = random_map(rng, 3, 3, 3);
  double lo = agg.min(), hi = agg.max();
  for (int t = 0; t < 40; ++t) {
    const FeatureMap f = random_map(rng, 3, 3, 3, -1.0 - t * 0.01, 1.0);
    lo = std::min(lo, f.min());
    hi = std::max(hi, f.max());
    agg = aggregate_recursive(agg, f, emb);
    ASSERT_GE(agg.min(), lo);
    ASSERT_LE(agg.max(), hi);
  }
}

}  // namespace
}  // namespace avp
