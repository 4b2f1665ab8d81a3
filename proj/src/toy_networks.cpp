#include "avp/toy_networks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>

#include "avp/rng.hpp"
#include "avp/warp.hpp"

namespace avp {
namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

int cell_size_of(const Image& image, int feature_height, int feature_width) {
  require(feature_height > 0 && feature_width > 0, "quality: empty feature grid");
  require(image.height() % feature_height == 0 && image.width() % feature_width == 0,
          "quality: feature grid must divide the image grid");
  const int s = image.height() / feature_height;
  require(image.width() / feature_width == s, "quality: anisotropic cell size");
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// ConvFeatureNet

ConvFeatureNet::ConvFeatureNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
  require(!layers_.empty(), "ConvFeatureNet: no layers");
  for (std::size_t n = 0; n < layers_.size(); ++n) {
    const auto& l = layers_[n];
    require(l.spec.kernel == 1 || l.spec.kernel == 3, "ConvFeatureNet: kernel must be 1 or 3");
    require(l.spec.stride == 1 || l.spec.stride == 2, "ConvFeatureNet: stride must be 1 or 2");
    require(l.weights.size() == static_cast<std::size_t>(l.spec.out_channels) *
                                    l.spec.in_channels * l.spec.kernel * l.spec.kernel,
            "ConvFeatureNet: weight count mismatch");
    require(l.bias.size() == static_cast<std::size_t>(l.spec.out_channels),
            "ConvFeatureNet: bias count mismatch");
    if (n > 0)
      require(l.spec.in_channels == layers_[n - 1].spec.out_channels,
              "ConvFeatureNet: channel chain mismatch");
  }
}

ConvFeatureNet ConvFeatureNet::random(const std::vector<ConvLayerSpec>& specs, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Layer> layers;
  for (std::size_t n = 0; n < specs.size(); ++n) {
    const ConvLayerSpec& s = specs[n];
    Layer l{s, {}, {}};
    const int fan_in = s.in_channels * s.kernel * s.kernel;
    const double scale = 1.2 / std::sqrt(static_cast<double>(fan_in));
    l.weights.resize(static_cast<std::size_t>(s.out_channels) * fan_in);
    for (auto& w : l.weights) w = rng.normal(0.0, scale);
    l.bias.resize(static_cast<std::size_t>(s.out_channels));
    for (int o = 0; o < s.out_channels; ++o) {
      double b = rng.normal(0.0, 0.05);
      // Images live in [0, 1]; centre the first layer around mid-gray.
      if (n == 0)
        for (int k = 0; k < fan_in; ++k)
          b -= 0.5 * l.weights[static_cast<std::size_t>(o) * fan_in + k];
      l.bias[static_cast<std::size_t>(o)] = b;
    }
    layers.push_back(std::move(l));
  }
  return ConvFeatureNet(std::move(layers));
}

ConvFeatureNet ConvFeatureNet::reference(std::uint64_t seed, int channels) {
  return random({{3, channels, 3, 1}, {channels, channels, 3, 2}, {channels, channels, 3, 1}},
                seed);
}

ConvFeatureNet ConvFeatureNet::pointwise(std::uint64_t seed, int channels) {
  return random({{3, channels, 1, 1}, {channels, channels, 1, 2}, {channels, channels, 1, 1}},
                seed);
}

std::pair<int, int> ConvFeatureNet::layer_output_grid(int layer, int in_height,
                                                      int in_width) const {
  const int s = layers_.at(static_cast<std::size_t>(layer)).spec.stride;
  return {(in_height + s - 1) / s, (in_width + s - 1) / s};
}

void ConvFeatureNet::compute_at(const Layer& l, const FeatureMap& input, int y, int x,
                                std::span<double> out) const {
  const int k = l.spec.kernel, r = k / 2, cin = l.spec.in_channels;
  const int cy = y * l.spec.stride, cx = x * l.spec.stride;
  for (int o = 0; o < l.spec.out_channels; ++o) {
    double acc = l.bias[static_cast<std::size_t>(o)];
    const double* w = l.weights.data() + static_cast<std::size_t>(o) * cin * k * k;
    for (int c = 0; c < cin; ++c) {
      for (int ky = 0; ky < k; ++ky) {
        const int sy = std::clamp(cy + ky - r, 0, input.height() - 1);
        for (int kx = 0; kx < k; ++kx) {
          const int sx = std::clamp(cx + kx - r, 0, input.width() - 1);
          acc += w[(c * k + ky) * k + kx] * input.at(sy, sx, c);
        }
      }
    }
    out[static_cast<std::size_t>(o)] = std::tanh(acc);
  }
}

FeatureMap ConvFeatureNet::apply_layer(int layer, const FeatureMap& input) const {
  const Layer& l = layers_.at(static_cast<std::size_t>(layer));
  require(input.channels() == l.spec.in_channels, "ConvFeatureNet: input channel mismatch");
  const auto [h, w] = layer_output_grid(layer, input.height(), input.width());
  FeatureMap out(h, w, l.spec.out_channels);
  out.set_layer_id(layer);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) compute_at(l, input, y, x, out.pixel(y, x));
  return out;
}

FeatureMap ConvFeatureNet::apply_layer_masked(int layer, const FeatureMap& input,
                                              const BinaryMask& mask,
                                              const FeatureMap& fallback) const {
  const Layer& l = layers_.at(static_cast<std::size_t>(layer));
  require(input.channels() == l.spec.in_channels, "ConvFeatureNet: input channel mismatch");
  const auto [h, w] = layer_output_grid(layer, input.height(), input.width());
  require(fallback.same_grid(h, w) && fallback.channels() == l.spec.out_channels,
          "ConvFeatureNet: fallback shape mismatch");
  require(mask.same_grid(h, w), "ConvFeatureNet: mask grid mismatch");
  FeatureMap out = fallback;
  out.set_layer_id(layer);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (mask.at(y, x) != 0) compute_at(l, input, y, x, out.pixel(y, x));
  return out;
}

double ConvFeatureNet::layer_macs(int layer, int out_height, int out_width) const {
  const ConvLayerSpec& s = layers_.at(static_cast<std::size_t>(layer)).spec;
  return static_cast<double>(out_height) * out_width * s.out_channels * s.in_channels *
         s.kernel * s.kernel;
}

// ---------------------------------------------------------------------------
// QualityHead and flow estimators

QualityHead QualityHead::calibrated() { return QualityHead({-8.0, 0.0, 0.0}, 1.0); }

std::array<ScalarPlane, QualityHead::kFeatures> QualityHead::features(
    const Image& key, const Image& cur, const MotionField& motion, int feature_height,
    int feature_width) {
  require(key.same_shape(cur), "quality: key and current frame shapes differ");
  const int s = cell_size_of(cur, feature_height, feature_width);
  const FeatureMap warped = warp(key, motion);
  ScalarPlane cell(feature_height, feature_width);
  const double norm = 1.0 / (s * s * cur.channels());
  double total = 0.0;
  for (int y = 0; y < feature_height; ++y) {
    for (int x = 0; x < feature_width; ++x) {
      double acc = 0.0;
      for (int dy = 0; dy < s; ++dy)
        for (int dx = 0; dx < s; ++dx)
          for (int c = 0; c < cur.channels(); ++c)
            acc += std::abs(cur.at(y * s + dy, x * s + dx, c) - warped.at(y * s + dy, x * s + dx, c));
      cell.at(y, x) = acc * norm;
      total += cell.at(y, x);
    }
  }
  ScalarPlane neighbourhood(feature_height, feature_width);
  for (int y = 0; y < feature_height; ++y) {
    for (int x = 0; x < feature_width; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          acc += cell.at(std::clamp(y + dy, 0, feature_height - 1),
                         std::clamp(x + dx, 0, feature_width - 1));
      neighbourhood.at(y, x) = acc / 9.0;
    }
  }
  ScalarPlane global(feature_height, feature_width,
                     total / static_cast<double>(feature_height * feature_width));
  return {std::move(cell), std::move(neighbourhood), std::move(global)};
}

QualityMap QualityHead::evaluate(const std::array<ScalarPlane, kFeatures>& phi) const {
  QualityMap q(phi[0].height(), phi[0].width());
  for (int y = 0; y < q.height(); ++y) {
    for (int x = 0; x < q.width(); ++x) {
      double v = bias_;
      for (int j = 0; j < kFeatures; ++j) v += weights_[static_cast<std::size_t>(j)] * phi[static_cast<std::size_t>(j)].at(y, x);
      q.at(y, x) = v;
    }
  }
  return q;
}

FlowOutput GroundTruthFlow::estimate(const FrameRef& key, const FrameRef& cur,
                                     int feature_height, int feature_width) const {
  require(key.image && cur.image, "GroundTruthFlow: missing frame");
  MotionField motion = sequence_->motion_between(cur.index, key.index);
  QualityMap quality = head_.evaluate(
      QualityHead::features(*key.image, *cur.image, motion, feature_height, feature_width));
  return {std::move(motion), std::move(quality)};
}

MotionField BlockMatchingFlow::match(const Image& key, const Image& cur) const {
  require(key.same_shape(cur), "BlockMatchingFlow: frame shapes differ");
  const int h = cur.height(), w = cur.width();
  MotionField motion(h, w);
  for (int by = 0; by < h; by += 2) {
    for (int bx = 0; bx < w; bx += 2) {
      double best = std::numeric_limits<double>::infinity();
      int best_dy = 0, best_dx = 0;
      // Search rings of growing radius so ties resolve toward small motion.
      for (int ring = 0; ring <= radius_; ++ring) {
        for (int dy = -ring; dy <= ring; ++dy) {
          for (int dx = -ring; dx <= ring; ++dx) {
            if (std::max(std::abs(dy), std::abs(dx)) != ring) continue;
            double sad = 0.0;
            for (int py = by - 2; py < by + 4; ++py) {
              for (int px = bx - 2; px < bx + 4; ++px) {
                const int cy = std::clamp(py, 0, h - 1), cx = std::clamp(px, 0, w - 1);
                const int ky = std::clamp(py + dy, 0, h - 1), kx = std::clamp(px + dx, 0, w - 1);
                for (int c = 0; c < cur.channels(); ++c)
                  sad += std::abs(cur.at(cy, cx, c) - key.at(ky, kx, c));
              }
            }
            if (sad < best) {
              best = sad;
              best_dy = dy;
              best_dx = dx;
            }
          }
        }
      }
      for (int y = by; y < std::min(by + 2, h); ++y)
        for (int x = bx; x < std::min(bx + 2, w); ++x) motion.set(y, x, best_dy, best_dx);
    }
  }
  return motion;
}

FlowOutput BlockMatchingFlow::estimate(const FrameRef& key, const FrameRef& cur,
                                       int feature_height, int feature_width) const {
  require(key.image && cur.image, "BlockMatchingFlow: missing frame");
  MotionField motion = match(*key.image, *cur.image);
  QualityMap quality = head_.evaluate(
      QualityHead::features(*key.image, *cur.image, motion, feature_height, feature_width));
  return {std::move(motion), std::move(quality)};
}

// ---------------------------------------------------------------------------
// Detector

DetectorParams DetectorParams::zeros(int channels) {
  DetectorParams p;
  p.objectness_w.assign(static_cast<std::size_t>(channels), 0.0);
  p.box_w.assign(static_cast<std::size_t>(4 * channels), 0.0);
  return p;
}

std::vector<double> DetectorParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  flat.insert(flat.end(), objectness_w.begin(), objectness_w.end());
  flat.push_back(objectness_b);
  flat.insert(flat.end(), box_w.begin(), box_w.end());
  flat.insert(flat.end(), box_b.begin(), box_b.end());
  return flat;
}

DetectorParams DetectorParams::unflatten(std::span<const double> flat, int channels) {
  DetectorParams p = zeros(channels);
  require(flat.size() == p.size(), "DetectorParams: flat size mismatch");
  auto it = flat.begin();
  std::copy_n(it, channels, p.objectness_w.begin());
  it += channels;
  p.objectness_b = *it++;
  std::copy_n(it, 4 * channels, p.box_w.begin());
  it += 4 * channels;
  std::copy_n(it, 4, p.box_b.begin());
  return p;
}

DetectionTargets make_targets(std::span<const Box> truth, int feature_height, int feature_width,
                              double cell_size) {
  DetectionTargets t{Plane<std::uint8_t>(feature_height, feature_width),
                     Plane<std::uint8_t>(feature_height, feature_width),
                     {ScalarPlane(feature_height, feature_width),
                      ScalarPlane(feature_height, feature_width),
                      ScalarPlane(feature_height, feature_width),
                      ScalarPlane(feature_height, feature_width)}};
  auto inside = [](const Box& b, double cy, double cx, double grow) {
    return cx >= b.x0 - grow && cx < b.x1 + grow && cy >= b.y0 - grow && cy < b.y1 + grow;
  };
  for (int y = 0; y < feature_height; ++y) {
    for (int x = 0; x < feature_width; ++x) {
      const double cy = (y + 0.5) * cell_size, cx = (x + 0.5) * cell_size;
      // Smallest containing box; failing that, smallest box grown by a cell.
      auto smallest = [&](double grow) {
        const Box* best = nullptr;
        for (const Box& b : truth)
          if (inside(b, cy, cx, grow) && (best == nullptr || b.area() < best->area())) best = &b;
        return best;
      };
      const Box* owner = smallest(0.0);
      const bool strict = owner != nullptr;
      if (!strict) owner = smallest(cell_size);
      if (owner == nullptr) continue;
      t.positive.at(y, x) = strict ? 1 : 0;
      t.regress.at(y, x) = 1;
      t.edges[0].at(y, x) = (cx - owner->x0) / cell_size;
      t.edges[1].at(y, x) = (cy - owner->y0) / cell_size;
      t.edges[2].at(y, x) = (owner->x1 - cx) / cell_size;
      t.edges[3].at(y, x) = (owner->y1 - cy) / cell_size;
    }
  }
  return t;
}

LinearDetector::LinearDetector(DetectorParams params, double cell_size, double threshold)
    : params_(std::move(params)), cell_size_(cell_size), threshold_(threshold) {
  require(params_.box_w.size() == 4 * params_.objectness_w.size(),
          "LinearDetector: parameter shapes disagree");
  require(cell_size > 0.0, "LinearDetector: cell size must be positive");
  require(threshold > 0.0 && threshold < 1.0, "LinearDetector: threshold must lie in (0, 1)");
}

LinearDetector LinearDetector::initial(int channels, double cell_size, std::uint64_t seed) {
  Rng rng(seed);
  DetectorParams p = DetectorParams::zeros(channels);
  for (auto& w : p.objectness_w) w = rng.normal(0.0, 0.1);
  p.objectness_b = -2.0;
  p.box_b = {2.0, 2.0, 2.0, 2.0};
  return LinearDetector(std::move(p), cell_size);
}

DetectorOutput LinearDetector::forward(const FeatureMap& features) const {
  const int channels = static_cast<int>(params_.objectness_w.size());
  require(features.channels() == channels, "LinearDetector: channel mismatch");
  const int h = features.height(), w = features.width();
  DetectorOutput out{ScalarPlane(h, w),
                     {ScalarPlane(h, w), ScalarPlane(h, w), ScalarPlane(h, w), ScalarPlane(h, w)}};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto f = features.pixel(y, x);
      double z = params_.objectness_b;
      for (int c = 0; c < channels; ++c) z += params_.objectness_w[static_cast<std::size_t>(c)] * f[c];
      out.logits.at(y, x) = z;
      for (int j = 0; j < 4; ++j) {
        double e = params_.box_b[static_cast<std::size_t>(j)];
        const double* row = params_.box_w.data() + static_cast<std::size_t>(j) * channels;
        for (int c = 0; c < channels; ++c) e += row[c] * f[c];
        out.edges[static_cast<std::size_t>(j)].at(y, x) = e;
      }
    }
  }
  return out;
}

Detections LinearDetector::detect(const FeatureMap& features) const {
  const DetectorOutput out = forward(features);
  const int h = features.height(), w = features.width();
  const double logit_threshold = std::log(threshold_ / (1.0 - threshold_));
  Plane<int> label(h, w, -1);
  Detections dets;
  for (int y0 = 0; y0 < h; ++y0) {
    for (int x0 = 0; x0 < w; ++x0) {
      if (label.at(y0, x0) >= 0 || out.logits.at(y0, x0) <= logit_threshold) continue;
      const int id = static_cast<int>(dets.size());
      std::queue<std::pair<int, int>> frontier;
      frontier.emplace(y0, x0);
      label.at(y0, x0) = id;
      double sx0 = 0, sy0 = 0, sx1 = 0, sy1 = 0, score = 0;
      int cells = 0;
      while (!frontier.empty()) {
        const auto [y, x] = frontier.front();
        frontier.pop();
        const double cy = (y + 0.5) * cell_size_, cx = (x + 0.5) * cell_size_;
        sx0 += cx - out.edges[0].at(y, x) * cell_size_;
        sy0 += cy - out.edges[1].at(y, x) * cell_size_;
        sx1 += cx + out.edges[2].at(y, x) * cell_size_;
        sy1 += cy + out.edges[3].at(y, x) * cell_size_;
        score += sigmoid(out.logits.at(y, x));
        ++cells;
        constexpr std::array<std::pair<int, int>, 4> kNeighbours = {{{-1, 0}, {1, 0}, {0, -1}, {0, 1}}};
        for (const auto& [dy, dx] : kNeighbours) {
          const int ny = y + dy, nx = x + dx;
          if (ny < 0 || nx < 0 || ny >= h || nx >= w) continue;
          if (label.at(ny, nx) >= 0 || out.logits.at(ny, nx) <= logit_threshold) continue;
          label.at(ny, nx) = id;
          frontier.emplace(ny, nx);
        }
      }
      Box box{sx0 / cells, sy0 / cells, sx1 / cells, sy1 / cells};
      // Inverted regressions collapse to an empty box.
      box.x1 = std::max(box.x1, box.x0);
      box.y1 = std::max(box.y1, box.y0);
      dets.push_back({box, score / cells});
    }
  }
  return dets;
}

double LinearDetector::macs(const FeatureMap& features) const {
  return static_cast<double>(features.positions()) * features.channels() * 5.0;
}

DetectionLoss LinearDetector::loss(const FeatureMap& features,
                                   const DetectionTargets& targets) const {
  const int channels = static_cast<int>(params_.objectness_w.size());
  const int h = features.height(), w = features.width();
  require(targets.positive.same_grid(h, w), "detection loss: target grid mismatch");
  const DetectorOutput out = forward(features);
  DetectionLoss result{0.0, FeatureMap(h, w, channels), DetectorParams::zeros(channels)};
  DetectorParams& gp = result.grad_params;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const auto f = features.pixel(y, x);
      auto gf = result.grad_features.pixel(y, x);
      const double z = out.logits.at(y, x);
      const double t = targets.positive.at(y, x) != 0 ? 1.0 : 0.0;
      result.value += softplus(z) - t * z;
      const double dz = sigmoid(z) - t;
      gp.objectness_b += dz;
      for (int c = 0; c < channels; ++c) {
        gp.objectness_w[static_cast<std::size_t>(c)] += dz * f[c];
        gf[c] += dz * params_.objectness_w[static_cast<std::size_t>(c)];
      }
      if (targets.regress.at(y, x) == 0) continue;
      for (int j = 0; j < 4; ++j) {
        const double err = out.edges[static_cast<std::size_t>(j)].at(y, x) -
                           targets.edges[static_cast<std::size_t>(j)].at(y, x);
        result.value += 0.5 * kBoxWeight * err * err;
        const double de = kBoxWeight * err;
        gp.box_b[static_cast<std::size_t>(j)] += de;
        const double* row = params_.box_w.data() + static_cast<std::size_t>(j) * channels;
        double* grow = gp.box_w.data() + static_cast<std::size_t>(j) * channels;
        for (int c = 0; c < channels; ++c) {
          grow[c] += de * f[c];
          gf[c] += de * row[c];
        }
      }
    }
  }
  return result;
}

int count_hits(const Detections& detections, std::span<const Box> truth) {
  int hits = 0;
  for (const Box& gt : truth) {
    double best = 0.0;
    for (const auto& d : detections) best = std::max(best, iou(d.box, gt));
    if (best >= 0.5) ++hits;
  }
  return hits;
}

double accuracy_proxy(std::span<const Detections> detections,
                      std::span<const std::vector<Box>> truth) {
  require(detections.size() == truth.size(), "accuracy_proxy: frame count mismatch");
  long hits = 0, objects = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    hits += count_hits(detections[i], truth[i]);
    objects += static_cast<long>(truth[i].size());
  }
  return objects == 0 ? 1.0 : static_cast<double>(hits) / static_cast<double>(objects);
}

double frame_hit_score(const Detections& detections, std::span<const Box> truth) {
  return static_cast<double>(count_hits(detections, truth));
}

}  // namespace avp
