#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "avp/networks.hpp"
#include "avp/synthetic.hpp"

namespace avp {

struct ConvLayerSpec {
  int in_channels = 3;
  int out_channels = 8;
  int kernel = 3;  // 1 or 3
  int stride = 1;  // 1 or 2
};

// Stack of small convolutions with tanh, replicate padding. Weights are
// stored (out, in, ky, kx) row-major per layer.
class ConvFeatureNet final : public FeatureNetwork {
 public:
  struct Layer {
    ConvLayerSpec spec;
    std::vector<double> weights;
    std::vector<double> bias;
  };

  explicit ConvFeatureNet(std::vector<Layer> layers);

  // 3 -> 8 -> 8 -> 8 channels, 3x3 kernels, stride 1 / 2 / 1.
  static ConvFeatureNet reference(std::uint64_t seed, int channels = 8);
  // Same geometry with 1x1 kernels (each output depends on one input position).
  static ConvFeatureNet pointwise(std::uint64_t seed, int channels = 8);
  static ConvFeatureNet random(const std::vector<ConvLayerSpec>& specs, std::uint64_t seed);

  int num_layers() const override { return static_cast<int>(layers_.size()); }
  int out_channels() const override { return layers_.back().spec.out_channels; }
  std::pair<int, int> layer_output_grid(int layer, int in_height, int in_width) const override;
  FeatureMap apply_layer(int layer, const FeatureMap& input) const override;
  FeatureMap apply_layer_masked(int layer, const FeatureMap& input, const BinaryMask& mask,
                                const FeatureMap& fallback) const override;
  double layer_macs(int layer, int out_height, int out_width) const override;

  const Layer& layer(int n) const { return layers_[static_cast<std::size_t>(n)]; }

 private:
  void compute_at(const Layer& layer, const FeatureMap& input, int y, int x,
                  std::span<double> out) const;

  std::vector<Layer> layers_;
};

// Linear quality head over photometric-consistency features:
//   phi0 = mean |I_cur - warp(I_key, M)| over the cell,
//   phi1 = phi0 averaged over the 3x3 cell neighbourhood,
//   phi2 = phi0 averaged over the frame.
// Q(p) = bias + sum_j weight_j * phi_j(p).
class QualityHead {
 public:
  static constexpr int kFeatures = 3;

  QualityHead() = default;
  QualityHead(std::array<double, kFeatures> weights, double bias)
      : weights_(weights), bias_(bias) {}

  // Hand-calibrated head: recompute where the cell residual exceeds ~0.12.
  static QualityHead calibrated();

  // Feature planes on the (feature_height x feature_width) grid.
  static std::array<ScalarPlane, kFeatures> features(const Image& key, const Image& cur,
                                                     const MotionField& motion,
                                                     int feature_height, int feature_width);

  QualityMap evaluate(const std::array<ScalarPlane, kFeatures>& phi) const;

  std::array<double, kFeatures>& weights() { return weights_; }
  const std::array<double, kFeatures>& weights() const { return weights_; }
  double& bias() { return bias_; }
  double bias() const { return bias_; }

 private:
  std::array<double, kFeatures> weights_{};
  double bias_ = 0.0;
};

// Motion straight from the generator, quality from a QualityHead.
class GroundTruthFlow final : public FlowEstimator {
 public:
  GroundTruthFlow(std::shared_ptr<const SyntheticSequence> sequence, QualityHead head)
      : sequence_(std::move(sequence)), head_(head) {}

  FlowOutput estimate(const FrameRef& key, const FrameRef& cur, int feature_height,
                      int feature_width) const override;

 private:
  std::shared_ptr<const SyntheticSequence> sequence_;
  QualityHead head_;
};

// Classical exhaustive block matching on 2x2 blocks (SAD over a 6x6 patch).
class BlockMatchingFlow final : public FlowEstimator {
 public:
  explicit BlockMatchingFlow(QualityHead head, int search_radius = 3)
      : head_(head), radius_(search_radius) {}

  FlowOutput estimate(const FrameRef& key, const FrameRef& cur, int feature_height,
                      int feature_width) const override;

  MotionField match(const Image& key, const Image& cur) const;

 private:
  QualityHead head_;
  int radius_;
};

// Per-cell objectness and box-edge distances. Distances are in cells.
struct DetectorParams {
  std::vector<double> objectness_w;  // C
  double objectness_b = 0.0;
  std::vector<double> box_w;         // 4 x C
  std::array<double, 4> box_b{};

  static DetectorParams zeros(int channels);
  std::size_t size() const { return objectness_w.size() + 1 + box_w.size() + 4; }
  // Flat views for optimizers and gradient checks.
  std::vector<double> flatten() const;
  static DetectorParams unflatten(std::span<const double> flat, int channels);
};

struct DetectorOutput {
  ScalarPlane logits;
  std::array<ScalarPlane, 4> edges;  // left, top, right, bottom (cells)
};

// Targets on the feature grid. A cell is positive when its centre lies in a
// box; edge targets are defined on the box grown by one cell so that border
// cells of a detected component still regress sensible edges.
struct DetectionTargets {
  Plane<std::uint8_t> positive;
  Plane<std::uint8_t> regress;
  std::array<ScalarPlane, 4> edges;
};

DetectionTargets make_targets(std::span<const Box> truth, int feature_height, int feature_width,
                              double cell_size);

struct DetectionLoss {
  double value = 0.0;
  FeatureMap grad_features;
  DetectorParams grad_params;
};

class LinearDetector final : public Detector {
 public:
  static constexpr double kBoxWeight = 0.1;

  LinearDetector(DetectorParams params, double cell_size, double threshold = 0.5);

  // Objectness initialised toward background, box edges to a prior size.
  static LinearDetector initial(int channels, double cell_size, std::uint64_t seed);

  DetectorOutput forward(const FeatureMap& features) const;
  Detections detect(const FeatureMap& features) const override;
  double macs(const FeatureMap& features) const override;

  // Sum over cells of logistic objectness loss plus kBoxWeight/2 * squared
  // edge error on regression cells, with gradients.
  DetectionLoss loss(const FeatureMap& features, const DetectionTargets& targets) const;

  const DetectorParams& params() const { return params_; }
  DetectorParams& params() { return params_; }
  double cell_size() const { return cell_size_; }

 private:
  DetectorParams params_;
  double cell_size_;
  double threshold_;
};

// Number of ground-truth boxes whose best IoU against any detection is >= 0.5.
int count_hits(const Detections& detections, std::span<const Box> truth);

// Hits over ground-truth objects, pooled across frames.
double accuracy_proxy(std::span<const Detections> detections,
                      std::span<const std::vector<Box>> truth);

// Per-frame oracle score: hit count.
double frame_hit_score(const Detections& detections, std::span<const Box> truth);

}  // namespace avp
