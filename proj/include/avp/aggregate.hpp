#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "avp/tensor.hpp"

namespace avp {

// Per-position embedding used only for similarity measurement.
class EmbeddingMap : public FeatureMap {
 public:
  using FeatureMap::FeatureMap;
  explicit EmbeddingMap(FeatureMap map) : FeatureMap(std::move(map)) {}
};

// Position-wise affine projection e = W (f - offset) from feature channels to
// an embedding. The offset defaults to zero.
class Embedder {
 public:
  static constexpr int kDefaultDim = 8;

  // weights are row-major (dim x in_channels).
  Embedder(int in_channels, int dim, std::vector<double> weights);

  static Embedder identity(int channels);
  // Entries drawn uniformly from [-1, 1) with a mt19937_64 stream.
  static Embedder seeded(int in_channels, int dim, std::uint64_t seed);

  // Same projection with a per-channel offset subtracted first.
  Embedder with_offset(std::vector<double> offset) const;

  int in_channels() const { return in_channels_; }
  int dim() const { return dim_; }
  std::span<const double> weights() const { return weights_; }
  std::span<const double> offset() const { return offset_; }

  EmbeddingMap embed(const FeatureMap& features) const;
  // Transposed projection of an embedding-space gradient.
  FeatureMap embed_backward(const FeatureMap& grad_embedding) const;

 private:
  int in_channels_;
  int dim_;
  std::vector<double> weights_;
  std::vector<double> offset_;
};

// Norm floor for the cosine similarity.
inline constexpr double kNormEpsilon = 1e-12;

// exp(cos(u, v)) with max(|.|, kNormEpsilon) norms and cos clamped to [-1, 1].
double exp_cosine(std::span<const double> u, std::span<const double> v);

// Accumulates grad * d exp_cosine / d{u, v} into grad_u / grad_v.
void exp_cosine_backward(std::span<const double> u, std::span<const double> v,
                         double grad, std::span<double> grad_u,
                         std::span<double> grad_v);

// Raw (unnormalized) weight exp(cos(e_src(p), e_ref(p))) per position.
ScalarPlane similarity_weights(const EmbeddingMap& src, const EmbeddingMap& ref);

// Divides each raw map by the per-position sum over sources.
std::vector<WeightMap> normalize_weights(std::span<const ScalarPlane> raw);

// One propagated feature map F_{k->i} of an aggregation window.
struct WindowEntry {
  int frame = 0;
  FeatureMap feature;
};

// Dense aggregation over a window that must contain the reference frame; the
// reference embedding is taken from that frame's own feature.
FeatureMap aggregate_dense(int ref_frame, std::span<const WindowEntry> window,
                           const Embedder& embedder);

struct RecursiveAggregation {
  FeatureMap output;
  WeightMap weight_prev;
  WeightMap weight_cur;
};

// Two-term aggregation of the warped running aggregate with the current
// feature, both weighted against the current feature's embedding.
RecursiveAggregation aggregate_recursive_detailed(const FeatureMap& prev_agg_warped,
                                                  const FeatureMap& cur,
                                                  const Embedder& embedder);

inline FeatureMap aggregate_recursive(const FeatureMap& prev_agg_warped,
                                      const FeatureMap& cur, const Embedder& embedder) {
  return aggregate_recursive_detailed(prev_agg_warped, cur, embedder).output;
}

struct RecursiveAggregationGradients {
  FeatureMap grad_prev;
  FeatureMap grad_cur;
};

// Backward pass of aggregate_recursive, including the paths through the
// similarity weights.
RecursiveAggregationGradients aggregate_recursive_backward(const FeatureMap& prev_agg_warped,
                                                           const FeatureMap& cur,
                                                           const Embedder& embedder,
                                                           const FeatureMap& grad_out);

}  // namespace avp
