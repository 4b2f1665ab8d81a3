#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avp/aggregate.hpp"
#include "avp/networks.hpp"
#include "avp/partial_update.hpp"
#include "avp/schedule.hpp"
#include "avp/warp.hpp"

namespace avp {

// Abstract compute model. Costs are multiply-accumulates.
struct CostModel {
  // The feature network costs this many times one flow evaluation.
  double feature_to_flow_ratio = 10.0;
};

// Everything the inference loop needs besides its configuration.
struct Networks {
  std::shared_ptr<const FeatureNetwork> feature;
  std::shared_ptr<const FlowEstimator> flow;
  std::shared_ptr<const Detector> detector;
  Embedder embedder = Embedder::identity(1);
  MotionResampler resample = resample_motion_bilinear;
  CostModel cost;
};

enum class DenseWindow { kCausal, kTwoSided };

struct PipelineConfig {
  bool do_aggr = false;
  bool do_spatial = false;
  SchedulerConfig scheduler;
  // Set only for dense (windowed) aggregation, where every frame is key.
  std::optional<int> dense_window_r;
  DenseWindow dense_window = DenseWindow::kCausal;
  // Update-area penalty; only used when training.
  double lambda = 0.0;

  void validate() const;
};

// Canonical configurations of the method matrix.
namespace presets {
PipelineConfig per_frame();
PipelineConfig sparse_propagation(int interval);
PipelineConfig dense_aggregation(int radius, DenseWindow window = DenseWindow::kCausal);
PipelineConfig recursive_aggregation(int interval);                   // c1
PipelineConfig partial_updating(int interval, double lambda = 2.0);   // c2
PipelineConfig adaptive(double gamma = 0.2, double lambda = 2.0);     // c3
PipelineConfig oracle(double lambda = 2.0);
}  // namespace presets

struct PipelineState {
  int frame_index = 0;  // last processed frame
  int key_index = 0;
  Image key_image;
  FeatureStack key_layers;                 // raw F_k, every layer
  std::optional<FeatureMap> key_aggregated; // F-bar_k, iff do_aggr
};

struct CostRecord {
  int frame = 0;
  bool is_key = false;
  double recompute_fraction = 0.0;
  double feat_cost = 0.0;
  double flow_cost = 0.0;
  double aggr_cost = 0.0;
  double det_cost = 0.0;

  double total() const { return feat_cost + flow_cost + aggr_cost + det_cost; }
};

class CostLedger {
 public:
  void add(const CostRecord& record) { records_.push_back(record); }
  std::span<const CostRecord> records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  double total_cost() const;
  double mean_cost() const;
  double key_rate() const;
  double mean_recompute_fraction() const;
  int key_count() const;

  // frame,is_key,recompute_fraction,feat_cost,flow_cost,aggr_cost,det_cost,total_cost
  void write_csv(std::ostream& out) const;

 private:
  std::vector<CostRecord> records_;
};

struct StepResult {
  Detections detections;
  PipelineState state;
  CostRecord cost;
  FeatureMap feature;  // the map handed to the detector
};

// Scores detections of one frame against that frame's ground truth.
using DetectionScorer = std::function<double(const Detections&, std::span<const Box>)>;

struct OracleContext {
  std::span<const std::vector<Box>> ground_truth;  // indexed by frame
  DetectionScorer score;
};

StepResult init(const Image& frame0, const PipelineConfig& config, const Networks& nets);

// Processes frame state.frame_index + 1.
StepResult step(const PipelineState& state, const Image& frame, const PipelineConfig& config,
                const Networks& nets, const OracleContext* oracle = nullptr);

// Runs one frame with the key decision fixed by the caller.
StepResult step_with_decision(const PipelineState& state, const Image& frame, bool key,
                              const PipelineConfig& config, const Networks& nets,
                              const std::optional<FlowOutput>& flow);

// Evaluates both branches for the frame and keys only on strict improvement.
// Returns the decision and the result of the chosen branch.
struct OracleDecision {
  bool key = false;
  double key_score = 0.0;
  double non_key_score = 0.0;
  StepResult chosen;
};
OracleDecision is_key_oracle(const PipelineState& state, const Image& frame,
                             const PipelineConfig& config, const Networks& nets,
                             const OracleContext& oracle);

// Dense windowed aggregation: per-frame features cached by frame index.
struct DenseAggregationState {
  std::map<int, FeatureMap> features;
};

struct DenseStepResult {
  Detections detections;
  DenseAggregationState state;
  CostRecord cost;
  FeatureMap feature;
};

DenseStepResult fgfa_mode_step(const DenseAggregationState& state, std::span<const Image> frames,
                               int frame_index, const PipelineConfig& config,
                               const Networks& nets);

struct RunOptions {
  bool keep_features = false;
  const OracleContext* oracle = nullptr;
};

struct RunResult {
  std::vector<Detections> detections;
  CostLedger ledger;
  std::vector<FeatureMap> features;  // filled when keep_features
};

RunResult run_sequence(std::span<const Image> frames, const PipelineConfig& config,
                       const Networks& nets, const RunOptions& options = {});

}  // namespace avp
