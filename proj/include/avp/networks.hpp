#pragma once

#include <vector>

#include "avp/tensor.hpp"

namespace avp {

// Outputs of every layer of a feature network; back() is the final feature.
using FeatureStack = std::vector<FeatureMap>;

// A feature network that exposes its per-layer decomposition so features can
// be recomputed layer by layer.
class FeatureNetwork {
 public:
  virtual ~FeatureNetwork() = default;

  virtual int num_layers() const = 0;
  virtual int out_channels() const = 0;
  // Output grid of `layer` for an input grid of (in_height, in_width).
  virtual std::pair<int, int> layer_output_grid(int layer, int in_height,
                                                int in_width) const = 0;
  virtual FeatureMap apply_layer(int layer, const FeatureMap& input) const = 0;
  // Multiply-accumulates of one full evaluation of `layer` on its output grid.
  virtual double layer_macs(int layer, int out_height, int out_width) const = 0;

  // Evaluates `layer` where mask is 1 and copies `fallback` elsewhere. The
  // default evaluates the whole layer and selects; overrides must produce
  // bit-identical results.
  virtual FeatureMap apply_layer_masked(int layer, const FeatureMap& input,
                                        const BinaryMask& mask,
                                        const FeatureMap& fallback) const;

  FeatureStack forward(const Image& image) const;
  FeatureMap features(const Image& image) const { return forward(image).back(); }
  double full_macs(int image_height, int image_width) const;
};

// Flow network output: motion at image resolution, quality at feature
// resolution.
struct FlowOutput {
  MotionField motion;
  QualityMap quality;
};

struct FrameRef {
  int index = 0;
  const Image* image = nullptr;
};

class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  // Estimates M_{cur->key} and Q_{key->cur}. `feature_height/width` give the
  // grid of the quality map.
  virtual FlowOutput estimate(const FrameRef& key, const FrameRef& cur,
                              int feature_height, int feature_width) const = 0;
};

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  double area() const;
  friend bool operator==(const Box&, const Box&) = default;
};

double iou(const Box& a, const Box& b);

struct Detection {
  Box box;
  double score = 0.0;
  friend bool operator==(const Detection&, const Detection&) = default;
};

using Detections = std::vector<Detection>;

class Detector {
 public:
  virtual ~Detector() = default;
  virtual Detections detect(const FeatureMap& features) const = 0;
  virtual double macs(const FeatureMap& features) const = 0;
};

}  // namespace avp
