#include "avp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace avp {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double flow_macs(const Networks& nets, const Image& frame) {
  return nets.feature->full_macs(frame.height(), frame.width()) /
         nets.cost.feature_to_flow_ratio;
}

// Embedding every source and the reference, cosine per source, then the
// weighted sum.
double aggregation_macs(const FeatureMap& feature, int sources, int embed_dim) {
  const double positions = static_cast<double>(feature.positions());
  const double channels = feature.channels();
  return positions * (sources * (channels * embed_dim + 3.0 * embed_dim + channels) +
                      channels * embed_dim);
}

double feature_macs(const FeatureNetwork& net, const FeatureStack& layers,
                    std::span<const double> fractions) {
  double total = 0.0;
  for (std::size_t n = 0; n < layers.size(); ++n)
    total += fractions[n] * net.layer_macs(static_cast<int>(n), layers[n].height(),
                                           layers[n].width());
  return total;
}

void check_networks(const Networks& nets) {
  require(nets.feature && nets.flow && nets.detector, "pipeline: networks are incomplete");
  require(nets.embedder.in_channels() == nets.feature->out_channels(),
          "pipeline: embedder does not match feature channels");
  require(nets.cost.feature_to_flow_ratio > 0.0, "pipeline: cost ratio must be positive");
}

bool decision_needs_flow(const PipelineConfig& config) {
  return config.scheduler.kind != SchedulerKind::kFixed;
}

}  // namespace

void PipelineConfig::validate() const {
  scheduler.validate();
  require(lambda >= 0.0, "pipeline: lambda must be >= 0");
  if (dense_window_r) {
    require(*dense_window_r >= 0, "pipeline: dense window radius must be >= 0");
    require(do_aggr && !do_spatial && scheduler.kind == SchedulerKind::kFixed &&
                scheduler.interval == 1,
            "pipeline: dense aggregation treats every frame as key with do_aggr only");
  }
}

namespace presets {

PipelineConfig per_frame() { return sparse_propagation(1); }

PipelineConfig sparse_propagation(int interval) {
  PipelineConfig c;
  c.scheduler.kind = SchedulerKind::kFixed;
  c.scheduler.interval = interval;
  return c;
}

PipelineConfig dense_aggregation(int radius, DenseWindow window) {
  PipelineConfig c = sparse_propagation(1);
  c.do_aggr = true;
  c.dense_window_r = radius;
  c.dense_window = window;
  return c;
}

PipelineConfig recursive_aggregation(int interval) {
  PipelineConfig c = sparse_propagation(interval);
  c.do_aggr = true;
  return c;
}

PipelineConfig partial_updating(int interval, double lambda) {
  PipelineConfig c = recursive_aggregation(interval);
  c.do_spatial = true;
  c.lambda = lambda;
  return c;
}

PipelineConfig adaptive(double gamma, double lambda) {
  PipelineConfig c;
  c.do_aggr = true;
  c.do_spatial = true;
  c.lambda = lambda;
  c.scheduler.kind = SchedulerKind::kAdaptive;
  c.scheduler.gamma = gamma;
  return c;
}

PipelineConfig oracle(double lambda) {
  PipelineConfig c = adaptive(0.2, lambda);
  c.scheduler.kind = SchedulerKind::kOracle;
  return c;
}

}  // namespace presets

double CostLedger::total_cost() const {
  double t = 0.0;
  for (const auto& r : records_) t += r.total();
  return t;
}

double CostLedger::mean_cost() const {
  return records_.empty() ? 0.0 : total_cost() / static_cast<double>(records_.size());
}

int CostLedger::key_count() const {
  return static_cast<int>(
      std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.is_key; }));
}

double CostLedger::key_rate() const {
  return records_.empty() ? 0.0 : static_cast<double>(key_count()) / records_.size();
}

double CostLedger::mean_recompute_fraction() const {
  if (records_.empty()) return 0.0;
  double t = 0.0;
  for (const auto& r : records_) t += r.recompute_fraction;
  return t / static_cast<double>(records_.size());
}

void CostLedger::write_csv(std::ostream& out) const {
  out << "frame,is_key,recompute_fraction,feat_cost,flow_cost,aggr_cost,det_cost,total_cost\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : records_) {
    out << r.frame << ',' << (r.is_key ? 1 : 0) << ',' << r.recompute_fraction << ','
        << r.feat_cost << ',' << r.flow_cost << ',' << r.aggr_cost << ',' << r.det_cost << ','
        << r.total() << '\n';
  }
  out.precision(old_precision);
}

StepResult init(const Image& frame0, const PipelineConfig& config, const Networks& nets) {
  config.validate();
  check_networks(nets);
  StepResult r;
  r.state.frame_index = 0;
  r.state.key_index = 0;
  r.state.key_image = frame0;
  r.state.key_layers = nets.feature->forward(frame0);
  const FeatureMap& f0 = r.state.key_layers.back();
  if (config.do_aggr) r.state.key_aggregated = f0;
  r.feature = f0;
  r.detections = nets.detector->detect(f0);
  r.cost.frame = 0;
  r.cost.is_key = true;
  r.cost.recompute_fraction = 1.0;
  r.cost.feat_cost = nets.feature->full_macs(frame0.height(), frame0.width());
  r.cost.det_cost = nets.detector->macs(f0);
  return r;
}

StepResult step_with_decision(const PipelineState& state, const Image& frame, bool key,
                              const PipelineConfig& config, const Networks& nets,
                              const std::optional<FlowOutput>& flow_in) {
  require(!state.key_layers.empty(), "step: pipeline state is not initialised");
  require(frame.same_shape(state.key_image), "step: frame shape differs from the key frame");
  require(config.do_aggr == state.key_aggregated.has_value(),
          "step: aggregation flag does not match the pipeline state");
  const int i = state.frame_index + 1;
  const FeatureMap& key_final = state.key_layers.back();
  const int fh = key_final.height(), fw = key_final.width();

  StepResult r;
  r.cost.frame = i;
  r.cost.is_key = key;

  std::optional<FlowOutput> flow = flow_in;
  const bool needs_flow = !key || config.do_aggr || decision_needs_flow(config);
  if (needs_flow && !flow) {
    flow = nets.flow->estimate({state.key_index, &state.key_image}, {i, &frame}, fh, fw);
  }
  if (flow) {
    require(flow->quality.same_grid(fh, fw), "step: flow quality grid mismatch");
    require(flow->motion.all_finite(), "step: flow network returned non-finite motion");
    r.cost.flow_cost = flow_macs(nets, frame);
  }

  PartialUpdateResult updated;
  if (key) {
    updated.layers = nets.feature->forward(frame);
    updated.layer_fractions.assign(updated.layers.size(), 1.0);
    updated.recompute_fraction = 1.0;
  } else {
    const double tau = config.scheduler.tau;
    const QualityMap quality =
        config.do_spatial ? flow->quality : QualityMap::filled(fh, fw, kInf);
    updated = partial_update(frame, state.key_layers, flow->motion, quality, *nets.feature,
                             tau, nets.resample);
  }
  r.cost.recompute_fraction = updated.recompute_fraction;
  r.cost.feat_cost = feature_macs(*nets.feature, updated.layers, updated.layer_fractions);

  const FeatureMap& current = updated.layers.back();
  if (config.do_aggr) {
    const MotionField motion = nets.resample(flow->motion, fh, fw);
    const FeatureMap prev = warp(*state.key_aggregated, motion);
    r.feature = aggregate_recursive(prev, current, nets.embedder);
    r.cost.aggr_cost = aggregation_macs(current, 2, nets.embedder.dim());
  } else {
    r.feature = current;
  }
  r.detections = nets.detector->detect(r.feature);
  r.cost.det_cost = nets.detector->macs(r.feature);

  r.state = state;
  r.state.frame_index = i;
  if (key) {
    r.state.key_index = i;
    r.state.key_image = frame;
    r.state.key_layers = std::move(updated.layers);
    if (config.do_aggr) r.state.key_aggregated = r.feature;
  }
  return r;
}

OracleDecision is_key_oracle(const PipelineState& state, const Image& frame,
                             const PipelineConfig& config, const Networks& nets,
                             const OracleContext& oracle) {
  const int i = state.frame_index + 1;
  require(static_cast<std::size_t>(i) < oracle.ground_truth.size(),
          "is_key_oracle: missing ground truth for frame");
  require(static_cast<bool>(oracle.score), "is_key_oracle: missing scorer");
  const FeatureMap& key_final = state.key_layers.back();
  const FlowOutput flow = nets.flow->estimate({state.key_index, &state.key_image}, {i, &frame},
                                              key_final.height(), key_final.width());
  const std::span<const Box> truth = oracle.ground_truth[static_cast<std::size_t>(i)];
  StepResult as_key = step_with_decision(state, frame, true, config, nets, flow);
  StepResult as_non_key = step_with_decision(state, frame, false, config, nets, flow);
  OracleDecision d;
  d.key_score = oracle.score(as_key.detections, truth);
  d.non_key_score = oracle.score(as_non_key.detections, truth);
  d.key = oracle_prefers_key(d.key_score, d.non_key_score);
  d.chosen = d.key ? std::move(as_key) : std::move(as_non_key);
  return d;
}

StepResult step(const PipelineState& state, const Image& frame, const PipelineConfig& config,
                const Networks& nets, const OracleContext* oracle) {
  config.validate();
  check_networks(nets);
  require(!config.dense_window_r, "step: dense aggregation runs through fgfa_mode_step");
  const int i = state.frame_index + 1;
  const SchedulerConfig& sched = config.scheduler;
  switch (sched.kind) {
    case SchedulerKind::kFixed:
      return step_with_decision(state, frame, is_key_fixed(i, sched.interval), config, nets,
                                std::nullopt);
    case SchedulerKind::kAdaptive: {
      const FeatureMap& key_final = state.key_layers.back();
      FlowOutput flow = nets.flow->estimate({state.key_index, &state.key_image}, {i, &frame},
                                            key_final.height(), key_final.width());
      const bool key = is_key_adaptive(flow.quality, sched.tau, sched.gamma);
      return step_with_decision(state, frame, key, config, nets, std::move(flow));
    }
    case SchedulerKind::kOracle:
      require(oracle != nullptr, "step: oracle scheduling needs ground truth");
      return is_key_oracle(state, frame, config, nets, *oracle).chosen;
  }
  throw ContractViolation("step: unknown scheduler");
}

DenseStepResult fgfa_mode_step(const DenseAggregationState& state, std::span<const Image> frames,
                               int frame_index, const PipelineConfig& config,
                               const Networks& nets) {
  config.validate();
  check_networks(nets);
  require(config.dense_window_r.has_value(), "fgfa_mode_step: dense window radius not set");
  const int n = static_cast<int>(frames.size());
  require(frame_index >= 0 && frame_index < n, "fgfa_mode_step: frame index out of range");
  const int r = *config.dense_window_r;
  const int lo = std::max(0, frame_index - r);
  const int hi = config.dense_window == DenseWindow::kTwoSided ? std::min(n - 1, frame_index + r)
                                                               : frame_index;
  DenseStepResult out;
  out.state = state;
  auto& cache = out.state.features;
  std::erase_if(cache, [&](const auto& kv) { return kv.first < lo; });

  out.cost.frame = frame_index;
  out.cost.is_key = true;
  out.cost.recompute_fraction = 1.0;
  const Image& cur = frames[static_cast<std::size_t>(frame_index)];
  for (int j = lo; j <= hi; ++j) {
    if (!cache.contains(j)) {
      cache.emplace(j, nets.feature->features(frames[static_cast<std::size_t>(j)]));
      out.cost.feat_cost += nets.feature->full_macs(cur.height(), cur.width());
    }
  }

  const FeatureMap& ref = cache.at(frame_index);
  std::vector<WindowEntry> window;
  window.reserve(static_cast<std::size_t>(hi - lo + 1));
  for (int j = lo; j <= hi; ++j) {
    if (j == frame_index) {
      window.push_back({j, ref});
      continue;
    }
    const FlowOutput flow = nets.flow->estimate({j, &frames[static_cast<std::size_t>(j)]},
                                                {frame_index, &cur}, ref.height(), ref.width());
    out.cost.flow_cost += flow_macs(nets, cur);
    const MotionField motion = nets.resample(flow.motion, ref.height(), ref.width());
    window.push_back({j, warp(cache.at(j), motion)});
  }
  out.feature = aggregate_dense(frame_index, window, nets.embedder);
  out.cost.aggr_cost =
      aggregation_macs(ref, static_cast<int>(window.size()), nets.embedder.dim());
  out.detections = nets.detector->detect(out.feature);
  out.cost.det_cost = nets.detector->macs(out.feature);
  return out;
}

RunResult run_sequence(std::span<const Image> frames, const PipelineConfig& config,
                       const Networks& nets, const RunOptions& options) {
  require(!frames.empty(), "run_sequence: empty sequence");
  config.validate();
  RunResult result;
  result.detections.reserve(frames.size());

  if (config.dense_window_r) {
    DenseAggregationState state;
    for (int i = 0; i < static_cast<int>(frames.size()); ++i) {
      DenseStepResult s = fgfa_mode_step(state, frames, i, config, nets);
      result.detections.push_back(std::move(s.detections));
      result.ledger.add(s.cost);
      if (options.keep_features) result.features.push_back(std::move(s.feature));
      state = std::move(s.state);
    }
    return result;
  }

  StepResult s = init(frames.front(), config, nets);
  for (std::size_t i = 0;; ++i) {
    result.detections.push_back(std::move(s.detections));
    result.ledger.add(s.cost);
    if (options.keep_features) result.features.push_back(std::move(s.feature));
    if (i + 1 == frames.size()) break;
    s = step(s.state, frames[i + 1], config, nets, options.oracle);
  }
  return result;
}

}  // namespace avp
