#include "avp/schedule.hpp"

#include <cmath>

namespace avp {

std::string_view to_string(SchedulerKind kind) {
  switch (kind) {
    case SchedulerKind::kFixed: return "fixed";
    case SchedulerKind::kAdaptive: return "adaptive";
    case SchedulerKind::kOracle: return "oracle";
  }
  return "fixed";
}

SchedulerKind scheduler_kind_from_string(std::string_view name) {
  if (name == "fixed") return SchedulerKind::kFixed;
  if (name == "adaptive") return SchedulerKind::kAdaptive;
  if (name == "oracle") return SchedulerKind::kOracle;
  throw ContractViolation("unknown scheduler kind: " + std::string(name));
}

void SchedulerConfig::validate() const {
  require(interval >= 1, "scheduler: interval must be >= 1");
  require(gamma >= 0.0 && gamma <= 1.0, "scheduler: gamma must lie in [0, 1]");
  require(!std::isnan(tau), "scheduler: tau must not be NaN");
}

double low_quality_fraction(const QualityMap& quality, double tau) {
  require(quality.size() > 0, "is_key_adaptive: empty quality map");
  std::size_t low = 0;
  for (double q : quality.values()) {
    require(!std::isnan(q), "is_key_adaptive: NaN quality");
    if (q <= tau) ++low;
  }
  return static_cast<double>(low) / static_cast<double>(quality.size());
}

bool is_key_adaptive(const QualityMap& quality, double tau, double gamma) {
  return low_quality_fraction(quality, tau) > gamma;
}

bool is_key_fixed(int frame_index, int interval) {
  require(frame_index >= 0, "is_key_fixed: negative frame index");
  require(interval >= 1, "is_key_fixed: interval must be >= 1");
  return frame_index % interval == 0;
}

}  // namespace avp
