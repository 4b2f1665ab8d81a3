#include "avp/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "avp/warp.hpp"

namespace avp {
namespace {

struct CosineParts {
  double dot = 0.0;
  double norm_u = 0.0;
  double norm_v = 0.0;
};

CosineParts cosine_parts(std::span<const double> u, std::span<const double> v) {
  CosineParts p;
  double uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    p.dot += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  p.norm_u = std::sqrt(uu);
  p.norm_v = std::sqrt(vv);
  return p;
}

double clamped_cosine(const CosineParts& p) {
  const double c =
      p.dot / (std::max(p.norm_u, kNormEpsilon) * std::max(p.norm_v, kNormEpsilon));
  return std::clamp(c, -1.0, 1.0);
}

}  // namespace

Embedder::Embedder(int in_channels, int dim, std::vector<double> weights)
    : in_channels_(in_channels), dim_(dim), weights_(std::move(weights)) {
  require(in_channels > 0 && dim > 0, "Embedder: dimensions must be positive");
  require(weights_.size() == static_cast<std::size_t>(in_channels) * dim,
          "Embedder: weight count must be dim * in_channels");
  offset_.assign(static_cast<std::size_t>(in_channels), 0.0);
}

Embedder Embedder::with_offset(std::vector<double> offset) const {
  require(offset.size() == static_cast<std::size_t>(in_channels_),
          "Embedder: offset must have one entry per input channel");
  Embedder e = *this;
  e.offset_ = std::move(offset);
  return e;
}

Embedder Embedder::identity(int channels) {
  std::vector<double> w(static_cast<std::size_t>(channels) * channels, 0.0);
  for (int i = 0; i < channels; ++i) w[static_cast<std::size_t>(i) * channels + i] = 1.0;
  return Embedder(channels, channels, std::move(w));
}

Embedder Embedder::seeded(int in_channels, int dim, std::uint64_t seed) {
  std::mt19937_64 engine(seed);
  std::vector<double> w(static_cast<std::size_t>(in_channels) * dim);
  for (auto& v : w) {
    const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;
    v = 2.0 * u - 1.0;
  }
  return Embedder(in_channels, dim, std::move(w));
}

EmbeddingMap Embedder::embed(const FeatureMap& features) const {
  require(features.channels() == in_channels_, "embed: channel count mismatch");
  EmbeddingMap out(features.height(), features.width(), dim_);
  for (int y = 0; y < features.height(); ++y) {
    for (int x = 0; x < features.width(); ++x) {
      const auto f = features.pixel(y, x);
      auto e = out.pixel(y, x);
      for (int d = 0; d < dim_; ++d) {
        const double* row = weights_.data() + static_cast<std::size_t>(d) * in_channels_;
        double acc = 0.0;
        for (int c = 0; c < in_channels_; ++c) acc += row[c] * (f[c] - offset_[c]);
        e[d] = acc;
      }
    }
  }
  return out;
}

FeatureMap Embedder::embed_backward(const FeatureMap& grad_embedding) const {
  require(grad_embedding.channels() == dim_, "embed_backward: channel count mismatch");
  FeatureMap out(grad_embedding.height(), grad_embedding.width(), in_channels_);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const auto g = grad_embedding.pixel(y, x);
      auto o = out.pixel(y, x);
      for (int d = 0; d < dim_; ++d) {
        const double* row = weights_.data() + static_cast<std::size_t>(d) * in_channels_;
        for (int c = 0; c < in_channels_; ++c) o[c] += row[c] * g[d];
      }
    }
  }
  return out;
}

double exp_cosine(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), "exp_cosine: dimension mismatch");
  return std::exp(clamped_cosine(cosine_parts(u, v)));
}

void exp_cosine_backward(std::span<const double> u, std::span<const double> v,
                         double grad, std::span<double> grad_u,
                         std::span<double> grad_v) {
  require(u.size() == v.size() && grad_u.size() == u.size() && grad_v.size() == v.size(),
          "exp_cosine_backward: dimension mismatch");
  const CosineParts p = cosine_parts(u, v);
  const double nu = std::max(p.norm_u, kNormEpsilon);
  const double nv = std::max(p.norm_v, kNormEpsilon);
  const double cos = p.dot / (nu * nv);
  if (cos < -1.0 || cos > 1.0) return;  // clamped: flat
  const double d_cos = grad * std::exp(cos);
  const bool u_scales = p.norm_u >= kNormEpsilon;
  const bool v_scales = p.norm_v >= kNormEpsilon;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double du = v[i] / (nu * nv);
    double dv = u[i] / (nu * nv);
    if (u_scales) du -= cos * u[i] / (nu * nu);
    if (v_scales) dv -= cos * v[i] / (nv * nv);
    grad_u[i] += d_cos * du;
    grad_v[i] += d_cos * dv;
  }
}

ScalarPlane similarity_weights(const EmbeddingMap& src, const EmbeddingMap& ref) {
  require(src.same_shape(ref), "similarity_weights: embedding shapes differ");
  ScalarPlane out(src.height(), src.width());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      out.at(y, x) = exp_cosine(src.pixel(y, x), ref.pixel(y, x));
  return out;
}

std::vector<WeightMap> normalize_weights(std::span<const ScalarPlane> raw) {
  require(!raw.empty(), "normalize_weights: empty source list");
  const int h = raw.front().height(), w = raw.front().width();
  for (const auto& r : raw) {
    require(r.same_grid(h, w), "normalize_weights: grid mismatch");
    for (double v : r.values())
      require(v > 0.0 && std::isfinite(v), "normalize_weights: raw weights must be positive");
  }
  std::vector<WeightMap> out(raw.size(), WeightMap(h, w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0.0;
      for (const auto& r : raw) sum += r.at(y, x);
      for (std::size_t k = 0; k < raw.size(); ++k) out[k].at(y, x) = raw[k].at(y, x) / sum;
    }
  }
  return out;
}

FeatureMap aggregate_dense(int ref_frame, std::span<const WindowEntry> window,
                           const Embedder& embedder) {
  require(!window.empty(), "aggregate_dense: empty window");
  const auto ref_it = std::find_if(window.begin(), window.end(),
                                   [&](const WindowEntry& e) { return e.frame == ref_frame; });
  require(ref_it != window.end(), "aggregate_dense: window must contain the reference frame");
  const FeatureMap& ref = ref_it->feature;
  for (const auto& e : window)
    require(e.feature.same_shape(ref), "aggregate_dense: mismatched grids");

  const EmbeddingMap ref_embedding = embedder.embed(ref);
  std::vector<ScalarPlane> raw;
  raw.reserve(window.size());
  for (const auto& e : window) raw.push_back(similarity_weights(embedder.embed(e.feature), ref_embedding));
  const std::vector<WeightMap> weights = normalize_weights(raw);

  FeatureMap out(ref.height(), ref.width(), ref.channels());
  out.set_layer_id(ref.layer_id());
  for (int y = 0; y < ref.height(); ++y) {
    for (int x = 0; x < ref.width(); ++x) {
      auto o = out.pixel(y, x);
      for (std::size_t k = 0; k < window.size(); ++k) {
        const double wk = weights[k].at(y, x);
        const auto f = window[k].feature.pixel(y, x);
        for (int c = 0; c < ref.channels(); ++c) o[c] += wk * f[c];
      }
    }
  }
  return out;
}

RecursiveAggregation aggregate_recursive_detailed(const FeatureMap& prev_agg_warped,
                                                  const FeatureMap& cur,
                                                  const Embedder& embedder) {
  require(prev_agg_warped.same_shape(cur), "aggregate_recursive: mismatched grids");
  const EmbeddingMap e_cur = embedder.embed(cur);
  const std::vector<ScalarPlane> raw = {
      similarity_weights(embedder.embed(prev_agg_warped), e_cur),
      similarity_weights(e_cur, e_cur)};
  std::vector<WeightMap> w = normalize_weights(raw);
  FeatureMap out = elementwise_blend(prev_agg_warped, cur, w[0], w[1]);
  return {std::move(out), std::move(w[0]), std::move(w[1])};
}

RecursiveAggregationGradients aggregate_recursive_backward(const FeatureMap& prev_agg_warped,
                                                           const FeatureMap& cur,
                                                           const Embedder& embedder,
                                                           const FeatureMap& grad_out) {
  require(prev_agg_warped.same_shape(cur) && grad_out.same_shape(cur),
          "aggregate_recursive_backward: shape mismatch");
  const int h = cur.height(), w = cur.width(), channels = cur.channels();
  const EmbeddingMap e_prev = embedder.embed(prev_agg_warped);
  const EmbeddingMap e_cur = embedder.embed(cur);
  FeatureMap ge_prev(h, w, embedder.dim());
  FeatureMap ge_cur(h, w, embedder.dim());
  RecursiveAggregationGradients g{FeatureMap(h, w, channels), FeatureMap(h, w, channels)};

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r_p = exp_cosine(e_prev.pixel(y, x), e_cur.pixel(y, x));
      const double r_c = exp_cosine(e_cur.pixel(y, x), e_cur.pixel(y, x));
      const double sum = r_p + r_c;
      const double w_p = r_p / sum, w_c = r_c / sum;
      const auto go = grad_out.pixel(y, x);
      const auto fp = prev_agg_warped.pixel(y, x), fc = cur.pixel(y, x);
      double gw_p = 0.0, gw_c = 0.0;
      auto gp = g.grad_prev.pixel(y, x), gc = g.grad_cur.pixel(y, x);
      for (int c = 0; c < channels; ++c) {
        gw_p += go[c] * fp[c];
        gw_c += go[c] * fc[c];
        gp[c] = w_p * go[c];
        gc[c] = w_c * go[c];
      }
      const double s2 = sum * sum;
      const double gr_p = (gw_p - gw_c) * r_c / s2;
      const double gr_c = (gw_c - gw_p) * r_p / s2;
      exp_cosine_backward(e_prev.pixel(y, x), e_cur.pixel(y, x), gr_p, ge_prev.pixel(y, x),
                          ge_cur.pixel(y, x));
      exp_cosine_backward(e_cur.pixel(y, x), e_cur.pixel(y, x), gr_c, ge_cur.pixel(y, x),
                          ge_cur.pixel(y, x));
    }
  }
  const FeatureMap from_prev = embedder.embed_backward(ge_prev);
  const FeatureMap from_cur = embedder.embed_backward(ge_cur);
  for (std::size_t i = 0; i < g.grad_prev.size(); ++i) {
    g.grad_prev.data()[i] += from_prev.data()[i];
    g.grad_cur.data()[i] += from_cur.data()[i];
  }
  return g;
}

}  // namespace avp
