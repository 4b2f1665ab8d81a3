#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "avp/pipeline.hpp"
#include "avp/synthetic.hpp"
#include "avp/train.hpp"

namespace avp {

struct SweepEntry {
  std::string label;
  PipelineConfig config;
};

struct SweepSpec {
  std::vector<SweepEntry> entries;

  void add(std::string label, PipelineConfig config) {
    entries.push_back({std::move(label), std::move(config)});
  }
  void validate() const;
};

// Axis values used to expand the standard method matrix.
struct SweepAxes {
  std::vector<int> intervals = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<double> gammas = {0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  std::vector<int> radii = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  bool include_oracle = false;
};

// per_frame, dff_l*, fgfa_r*, c1_l*, c2_l*, c3_g* (and oracle).
SweepSpec standard_sweep(const SweepAxes& axes);

// Outcome of one (config, sequence) job.
struct JobResult {
  double accuracy_proxy = 0.0;
  double mean_cost = 0.0;
  double key_rate = 0.0;
  double recompute_fraction = 0.0;
};

struct CurveRow {
  std::string label;
  double accuracy_proxy = 0.0;  // mean over sequences
  double mean_cost = 0.0;       // per frame, mean over sequences
  double key_rate = 0.0;
  double recompute_fraction = 0.0;
  std::vector<JobResult> per_sequence;
};

struct SweepOptions {
  FlowKind flow = FlowKind::kGroundTruth;
  int workers = 1;
  // When set, every entry gets its own detector adapted to its pipeline.
  std::optional<AdaptationSpec> adapt;
};

// Runs every entry on every sequence. Adaptation (per entry) and evaluation
// (per entry and sequence) are spread over `workers` threads; rows come back
// in entry order regardless of scheduling.
std::vector<CurveRow> run_sweep(const SweepSpec& spec,
                                const std::vector<std::shared_ptr<const SyntheticSequence>>& sequences,
                                const ToyModel& model, const SweepOptions& options = {});

// One configuration on one sequence.
JobResult run_job(const PipelineConfig& config, const std::shared_ptr<const SyntheticSequence>& sequence,
                  const ToyModel& model, FlowKind flow, CostLedger* ledger = nullptr);

// label,accuracy_proxy,mean_cost,key_rate,recompute_fraction
void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows);

}  // namespace avp
