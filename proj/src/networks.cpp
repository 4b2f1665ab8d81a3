#include "avp/networks.hpp"

#include <algorithm>
#include <tuple>

namespace avp {

FeatureMap FeatureNetwork::apply_layer_masked(int layer, const FeatureMap& input,
                                              const BinaryMask& mask,
                                              const FeatureMap& fallback) const {
  FeatureMap full = apply_layer(layer, input);
  require(full.same_shape(fallback), "apply_layer_masked: fallback shape mismatch");
  require(mask.same_grid(full.height(), full.width()), "apply_layer_masked: mask grid mismatch");
  FeatureMap out = fallback;
  out.set_layer_id(layer);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      if (mask.at(y, x) != 0) std::ranges::copy(full.pixel(y, x), out.pixel(y, x).begin());
  return out;
}

FeatureStack FeatureNetwork::forward(const Image& image) const {
  FeatureStack stack;
  stack.reserve(static_cast<std::size_t>(num_layers()));
  const FeatureMap* input = &image;
  for (int n = 0; n < num_layers(); ++n) {
    stack.push_back(apply_layer(n, *input));
    input = &stack.back();
  }
  return stack;
}

double FeatureNetwork::full_macs(int image_height, int image_width) const {
  double total = 0.0;
  int h = image_height, w = image_width;
  for (int n = 0; n < num_layers(); ++n) {
    std::tie(h, w) = layer_output_grid(n, h, w);
    total += layer_macs(n, h, w);
  }
  return total;
}

double Box::area() const { return std::max(0.0, x1 - x0) * std::max(0.0, y1 - y0); }

double iou(const Box& a, const Box& b) {
  const double ix = std::max(0.0, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
  const double iy = std::max(0.0, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace avp
