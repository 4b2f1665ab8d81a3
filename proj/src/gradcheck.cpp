#include "avp/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <ostream>

#include "avp/aggregate.hpp"
#include "avp/partial_update.hpp"
#include "avp/rng.hpp"
#include "avp/toy_networks.hpp"
#include "avp/warp.hpp"

namespace avp {

double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), kRelativeErrorFloor});
  return std::abs(analytic - numeric) / scale;
}

bool GradCheckReport::passed() const {
  return !components.empty() &&
         std::all_of(components.begin(), components.end(), [](const auto& c) { return c.passed; });
}

namespace {

class Tally {
 public:
  Tally(std::string name, double tolerance) : tolerance_(tolerance) { report_.name = std::move(name); }

  // Compares analytic d objective / d x[n] with a central difference for
  // every entry of x. `objective` reads x, which is perturbed in place.
  void compare(std::span<double> x, std::span<const double> analytic,
               const std::function<double()>& objective, double h, int case_index,
               const char* what) {
    for (std::size_t n = 0; n < x.size(); ++n) {
      const double saved = x[n];
      x[n] = saved + h;
      const double plus = objective();
      x[n] = saved - h;
      const double minus = objective();
      x[n] = saved;
      record((plus - minus) / (2.0 * h), analytic[n], case_index, what, n);
    }
  }

  void record(double numeric, double analytic, int case_index, const char* what, std::size_t n) {
    ++report_.entries;
    const double err = relative_error(analytic, numeric);
    if (err > report_.max_relative_error || !std::isfinite(err)) {
      report_.max_relative_error = err;
      report_.worst = "case " + std::to_string(case_index) + " " + what + "[" + std::to_string(n) + "]";
    }
  }

  ComponentReport finish(int cases) {
    report_.cases = cases;
    report_.passed = report_.entries > 0 && std::isfinite(report_.max_relative_error) &&
                     report_.max_relative_error <= tolerance_;
    return report_;
  }

 private:
  double tolerance_;
  ComponentReport report_;
};

void fill_normal(std::span<double> v, Rng& rng, double sigma = 1.0) {
  for (double& x : v) x = rng.normal(0.0, sigma);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) s += a[n] * b[n];
  return s;
}

// Sample coordinate in (0, size - 1), kept 0.05 away from integers so the
// bilinear sampler is smooth in a neighbourhood. Every fourth case lands on
// a half-integer.
double smooth_sample(Rng& rng, int size, bool half) {
  const int cell = rng.uniform_int(0, size - 2);
  return cell + (half ? 0.5 : 0.05 + 0.9 * rng.uniform());
}

ComponentReport check_warp(const GradCheckOptions& o, bool wrt_flow) {
  Tally tally(wrt_flow ? "warp_flow" : "warp_features", o.tolerance);
  Rng rng(derive_seed(o.seed, wrt_flow ? 2 : 1));
  for (int k = 0; k < o.cases; ++k) {
    const int h = rng.uniform_int(2, 6), w = rng.uniform_int(2, 6), c = rng.uniform_int(1, 4);
    FeatureMap src(h, w, c);
    fill_normal(src.data(), rng);
    MotionField motion(h, w);
    const bool half = k % 4 == 3;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        motion.set(y, x, smooth_sample(rng, h, half) - y, smooth_sample(rng, w, half) - x);
    FeatureMap upstream(h, w, c);
    fill_normal(upstream.data(), rng);

    const WarpGradients g = warp_backward(src, motion, upstream);
    auto objective = [&] { return dot(warp(src, motion).data(), upstream.data()); };
    if (wrt_flow)
      tally.compare(motion.data(), g.grad_motion.data(), objective, o.step, k, "motion");
    else
      tally.compare(src.data(), g.grad_src.data(), objective, o.step, k, "src");
  }
  return tally.finish(o.cases);
}

ComponentReport check_exp_cosine(const GradCheckOptions& o) {
  Tally tally("exp_cosine", o.tolerance);
  Rng rng(derive_seed(o.seed, 3));
  for (int k = 0; k < o.cases; ++k) {
    std::vector<double> uv(16), grad(16, 0.0);
    fill_normal(uv, rng);
    const double upstream = rng.normal();
    std::span<double> u(uv.data(), 8), v(uv.data() + 8, 8);
    exp_cosine_backward(u, v, upstream, std::span(grad.data(), 8), std::span(grad.data() + 8, 8));
    tally.compare(uv, grad, [&] { return upstream * exp_cosine(u, v); }, o.step, k, "uv");
  }
  return tally.finish(o.cases);
}

ComponentReport check_aggregation(const GradCheckOptions& o) {
  Tally tally("aggregation", o.tolerance);
  Rng rng(derive_seed(o.seed, 4));
  for (int k = 0; k < o.cases; ++k) {
    const int h = rng.uniform_int(1, 4), w = rng.uniform_int(1, 4), c = rng.uniform_int(2, 6);
    const Embedder embedder = Embedder::seeded(c, Embedder::kDefaultDim, rng.next_u64());
    FeatureMap prev(h, w, c), cur(h, w, c), upstream(h, w, c);
    fill_normal(prev.data(), rng);
    fill_normal(cur.data(), rng);
    fill_normal(upstream.data(), rng);
    const auto g = aggregate_recursive_backward(prev, cur, embedder, upstream);
    auto objective = [&] { return dot(aggregate_recursive(prev, cur, embedder).data(), upstream.data()); };
    tally.compare(prev.data(), g.grad_prev.data(), objective, o.step, k, "prev");
    tally.compare(cur.data(), g.grad_cur.data(), objective, o.step, k, "cur");
  }
  return tally.finish(o.cases);
}

// The blend takes convex weight pairs, so the weight is checked along the
// constrained direction w_a = t, w_b = 1 - t used by the partial update.
ComponentReport check_blend(const GradCheckOptions& o) {
  Tally tally("blend", o.tolerance);
  Rng rng(derive_seed(o.seed, 5));
  for (int k = 0; k < o.cases; ++k) {
    const int h = rng.uniform_int(1, 4), w = rng.uniform_int(1, 4), c = rng.uniform_int(1, 4);
    FeatureMap a(h, w, c), b(h, w, c), upstream(h, w, c);
    fill_normal(a.data(), rng);
    fill_normal(b.data(), rng);
    fill_normal(upstream.data(), rng);
    std::vector<double> t(static_cast<std::size_t>(h * w));
    for (double& v : t) v = rng.uniform();
    auto planes = [&] {
      ScalarPlane wa(h, w, t), wb(h, w);
      for (std::size_t n = 0; n < t.size(); ++n) wb.values()[n] = 1.0 - t[n];
      return std::pair{wa, wb};
    };
    const auto [wa, wb] = planes();
    const BlendGradients g = blend_backward(a, b, wa, wb, upstream);
    std::vector<double> grad_t(t.size());
    for (std::size_t n = 0; n < t.size(); ++n) grad_t[n] = g.grad_w_a.values()[n] - g.grad_w_b.values()[n];
    auto objective = [&] {
      const auto [pa, pb] = planes();
      return dot(elementwise_blend(a, b, pa, pb).data(), upstream.data());
    };
    tally.compare(a.data(), g.grad_a.data(), objective, o.step, k, "a");
    tally.compare(b.data(), g.grad_b.data(), objective, o.step, k, "b");
    tally.compare(t, grad_t, objective, o.step, k, "t");
  }
  return tally.finish(o.cases);
}

ComponentReport check_detection_loss(const GradCheckOptions& o) {
  Tally tally("detection_loss", o.tolerance);
  Rng rng(derive_seed(o.seed, 6));
  constexpr double kCell = 2.0;
  for (int k = 0; k < o.cases; ++k) {
    const int h = rng.uniform_int(3, 6), w = rng.uniform_int(3, 6), c = rng.uniform_int(2, 5);
    FeatureMap features(h, w, c);
    for (double& v : features.data()) v = std::tanh(rng.normal());
    std::vector<double> params(DetectorParams::zeros(c).size());
    fill_normal(params, rng, 0.5);

    std::vector<Box> truth;
    const int objects = rng.uniform_int(0, 2);
    for (int n = 0; n < objects; ++n) {
      const double y0 = rng.uniform(0.0, h * kCell - 3.0), x0 = rng.uniform(0.0, w * kCell - 3.0);
      truth.push_back({x0, y0, x0 + rng.uniform(2.0, 5.0), y0 + rng.uniform(2.0, 5.0)});
    }
    const DetectionTargets targets = make_targets(truth, h, w, kCell);

    auto loss_at = [&] {
      const LinearDetector det(DetectorParams::unflatten(params, c), kCell);
      return det.loss(features, targets);
    };
    const DetectionLoss g = loss_at();
    auto objective = [&] { return loss_at().value; };
    tally.compare(features.data(), g.grad_features.data(), objective, o.step, k, "features");
    tally.compare(params, g.grad_params.flatten(), objective, o.step, k, "params");
  }
  return tally.finish(o.cases);
}

// The surrogate is a step function, so it is compared with its definition
// rather than with finite differences.
ComponentReport check_ste(const GradCheckOptions& o) {
  ComponentReport r;
  r.name = "ste";
  Rng rng(derive_seed(o.seed, 7));
  const int points = 100 * o.cases;
  bool ok = true;
  for (int k = 0; k < points; ++k) {
    const double tau = rng.uniform(-2.0, 2.0);
    // Every tenth point sits exactly on the |q - tau| = 1 boundary.
    const double q = k % 10 == 0 ? tau + (k % 20 == 0 ? 1.0 : -1.0) : rng.uniform(-4.0, 4.0);
    const double expected = std::abs(q - tau) <= 1.0 ? -1.0 : 0.0;
    const double got = ste_gradient(q, tau);
    ++r.entries;
    if (got != expected && ok) {
      ok = false;
      r.max_relative_error = std::abs(got - expected);
      r.worst = "q=" + std::to_string(q) + " tau=" + std::to_string(tau);
    }
  }
  r.cases = points;
  r.passed = ok;
  return r;
}

}  // namespace

GradCheckReport gradient_check(const GradCheckOptions& options) {
  require(options.cases > 0 && options.step > 0.0 && options.tolerance > 0.0,
          "gradient_check: bad options");
  GradCheckReport report;
  report.components.push_back(check_warp(options, false));
  report.components.push_back(check_warp(options, true));
  report.components.push_back(check_exp_cosine(options));
  report.components.push_back(check_aggregation(options));
  report.components.push_back(check_blend(options));
  report.components.push_back(check_detection_loss(options));
  report.components.push_back(check_ste(options));
  return report;
}

void write_report(std::ostream& out, const GradCheckReport& report) {
  for (const auto& c : report.components) {
    out << c.name << (c.passed ? " PASS" : " FAIL") << " cases=" << c.cases
        << " entries=" << c.entries << " max_rel=" << c.max_relative_error;
    if (!c.worst.empty()) out << " worst=" << c.worst;
    out << '\n';
  }
}

}  // namespace avp
