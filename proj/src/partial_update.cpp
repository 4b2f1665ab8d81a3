#include "avp/partial_update.hpp"

#include <algorithm>
#include <cmath>

namespace avp {

UpdateDecision build_update_mask(const QualityMap& quality, double tau) {
  BinaryMask mask(quality.height(), quality.width());
  std::size_t ones = 0;
  for (int y = 0; y < quality.height(); ++y) {
    for (int x = 0; x < quality.width(); ++x) {
      const double q = quality.at(y, x);
      require(!std::isnan(q), "build_update_mask: NaN quality");
      const bool recompute = q <= tau;
      mask.at(y, x) = recompute ? 1 : 0;
      ones += recompute ? 1 : 0;
    }
  }
  const double fraction = static_cast<double>(ones) / static_cast<double>(mask.size());
  return {std::move(mask), fraction};
}

FeatureMap partial_update_layer(const FeatureMap& prev_layer_updated,
                                const FeatureMap& propagated_cur_layer,
                                const BinaryMask& mask, const LayerFn& layer_fn) {
  require(mask.same_grid(propagated_cur_layer.height(), propagated_cur_layer.width()),
          "partial_update_layer: mask grid does not match layer grid");
  const FeatureMap recomputed = layer_fn(prev_layer_updated);
  require(recomputed.same_shape(propagated_cur_layer),
          "partial_update_layer: layer output does not match propagated feature");
  FeatureMap out = propagated_cur_layer;
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      if (mask.at(y, x) != 0)
        std::ranges::copy(recomputed.pixel(y, x), out.pixel(y, x).begin());
  return out;
}

PartialUpdateResult partial_update(const Image& frame, const FeatureStack& key_layers,
                                   const MotionField& motion, const QualityMap& quality,
                                   const FeatureNetwork& net, double tau,
                                   const MotionResampler& resample) {
  require(static_cast<int>(key_layers.size()) == net.num_layers(),
          "partial_update: key feature stack does not match the network depth");
  const FeatureMap& final_key = key_layers.back();
  require(quality.same_grid(final_key.height(), final_key.width()),
          "partial_update: quality map must be on the final feature grid");

  const UpdateDecision decision = build_update_mask(quality, tau);
  const std::size_t ones = decision.mask.count_ones();
  const bool all_ones = ones == decision.mask.size();
  const bool all_zeros = ones == 0;

  PartialUpdateResult result;
  result.recompute_fraction = decision.recompute_fraction;
  result.layers.reserve(key_layers.size());
  const FeatureMap* input = &frame;
  for (int n = 0; n < net.num_layers(); ++n) {
    const FeatureMap& key = key_layers[static_cast<std::size_t>(n)];
    const auto grid = net.layer_output_grid(n, input->height(), input->width());
    require(key.same_grid(grid.first, grid.second),
            "partial_update: key layer grid does not match the network");
    if (all_ones) {
      result.layers.push_back(net.apply_layer(n, *input));
      result.layer_fractions.push_back(1.0);
    } else {
      const MotionField layer_motion = resample(motion, key.height(), key.width());
      FeatureMap propagated = warp(key, layer_motion);
      propagated.set_layer_id(n);
      if (all_zeros) {
        result.layers.push_back(std::move(propagated));
        result.layer_fractions.push_back(0.0);
      } else {
        const BinaryMask layer_mask = resize_mask_nearest(decision.mask, key.height(), key.width());
        result.layers.push_back(net.apply_layer_masked(n, *input, layer_mask, propagated));
        result.layer_fractions.push_back(layer_mask.mean());
      }
    }
    input = &result.layers.back();
  }
  return result;
}

double ste_gradient(double q, double tau) {
  if (!std::isfinite(q)) return 0.0;
  return std::abs(q - tau) <= 1.0 ? -1.0 : 0.0;
}

}  // namespace avp
