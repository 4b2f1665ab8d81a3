#pragma once

#include <functional>
#include <vector>

#include "avp/networks.hpp"
#include "avp/tensor.hpp"
#include "avp/warp.hpp"

namespace avp {

// Default quality threshold; Q - tau acts as a learnable bias so 0 suffices.
inline constexpr double kDefaultTau = 0.0;

struct UpdateDecision {
  BinaryMask mask;
  double recompute_fraction = 0.0;  // ones / positions, exactly
};

// U(p) = 1 iff Q(p) <= tau. -inf gives all ones, +inf all zeros.
UpdateDecision build_update_mask(const QualityMap& quality, double tau);

using LayerFn = std::function<FeatureMap(const FeatureMap&)>;

// out(p) = layer_fn(prev_layer_updated)(p) where mask(p) = 1, otherwise
// propagated_cur_layer(p). The mask must already be on the layer's grid.
FeatureMap partial_update_layer(const FeatureMap& prev_layer_updated,
                                const FeatureMap& propagated_cur_layer,
                                const BinaryMask& mask, const LayerFn& layer_fn);

struct PartialUpdateResult {
  FeatureStack layers;                 // partially updated output of every layer
  std::vector<double> layer_fractions; // recomputed fraction per layer
  double recompute_fraction = 0.0;     // at the final feature grid
};

// Layer-by-layer partial update of frame `frame` from the key frame's layer
// outputs. `motion` may be given on any grid; it is resampled to each
// layer's grid. `quality` lives on the final feature grid.
PartialUpdateResult partial_update(const Image& frame, const FeatureStack& key_layers,
                                   const MotionField& motion, const QualityMap& quality,
                                   const FeatureNetwork& net, double tau,
                                   const MotionResampler& resample = resample_motion_bilinear);

// Straight-through surrogate of dU/dQ: -1 inside |q - tau| <= 1, else 0.
double ste_gradient(double q, double tau);

}  // namespace avp
