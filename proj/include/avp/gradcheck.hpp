#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace avp {

struct GradCheckOptions {
  int cases = 100;          // randomized cases per component
  double step = 1e-5;       // central-difference step h
  double tolerance = 1e-4;  // max relative error
  std::uint64_t seed = 1;
};

// |a - n| / max(|a|, |n|, floor). The floor keeps near-zero entries from
// turning rounding noise into a large ratio.
inline constexpr double kRelativeErrorFloor = 1e-6;
double relative_error(double analytic, double numeric);

struct ComponentReport {
  std::string name;
  int cases = 0;
  long entries = 0;            // individual partial derivatives compared
  double max_relative_error = 0.0;
  std::string worst;           // where max_relative_error occurred
  bool passed = false;
};

struct GradCheckReport {
  std::vector<ComponentReport> components;
  bool passed() const;
};

// Components: warp w.r.t. features, warp w.r.t. flow, exp-cosine weight,
// recursive aggregation (weights included), blend, detection loss, and the
// straight-through surrogate against its piecewise definition.
GradCheckReport gradient_check(const GradCheckOptions& options = {});

// One line per component, e.g. "warp_flow PASS cases=100 entries=... max_rel=...".
void write_report(std::ostream& out, const GradCheckReport& report);

}  // namespace avp
