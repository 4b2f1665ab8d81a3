#pragma once

#include <string>
#include <string_view>

#include "avp/tensor.hpp"

namespace avp {

enum class SchedulerKind { kFixed, kAdaptive, kOracle };

std::string_view to_string(SchedulerKind kind);
SchedulerKind scheduler_kind_from_string(std::string_view name);

struct SchedulerConfig {
  SchedulerKind kind = SchedulerKind::kFixed;
  int interval = 10;    // key every `interval` frames (fixed)
  double gamma = 0.2;   // low-quality area fraction that triggers a key (adaptive)
  double tau = 0.0;     // quality threshold

  void validate() const;
};

// Fraction of positions with Q(p) <= tau.
double low_quality_fraction(const QualityMap& quality, double tau);

// Key iff the low-quality fraction strictly exceeds gamma.
bool is_key_adaptive(const QualityMap& quality, double tau, double gamma);

bool is_key_fixed(int frame_index, int interval);

// Oracle tie rule: a key frame is paid for only on strict improvement.
inline bool oracle_prefers_key(double key_score, double non_key_score) {
  return key_score > non_key_score;
}

}  // namespace avp
