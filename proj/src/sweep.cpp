#include "avp/sweep.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

namespace avp {

void SweepSpec::validate() const {
  require(!entries.empty(), "sweep: no configurations");
  for (const auto& e : entries) {
    require(!e.label.empty(), "sweep: empty label");
    e.config.validate();
  }
}

SweepSpec standard_sweep(const SweepAxes& axes) {
  SweepSpec spec;
  spec.add("per_frame", presets::per_frame());
  for (int l : axes.intervals) spec.add("dff_l" + std::to_string(l), presets::sparse_propagation(l));
  for (int r : axes.radii) spec.add("fgfa_r" + std::to_string(r), presets::dense_aggregation(r));
  for (int l : axes.intervals) spec.add("c1_l" + std::to_string(l), presets::recursive_aggregation(l));
  for (int l : axes.intervals) spec.add("c2_l" + std::to_string(l), presets::partial_updating(l));
  for (double g : axes.gammas) {
    std::ostringstream label;
    label << "c3_g" << g;
    spec.add(label.str(), presets::adaptive(g));
  }
  if (axes.include_oracle) spec.add("oracle", presets::oracle());
  return spec;
}

JobResult run_job(const PipelineConfig& config, const std::shared_ptr<const SyntheticSequence>& sequence,
                  const ToyModel& model, FlowKind flow, CostLedger* ledger) {
  require(sequence != nullptr, "run_job: missing sequence");
  const Networks nets = model.networks_for(sequence, flow);
  const auto truth = sequence->gt_boxes();
  OracleContext oracle{truth, frame_hit_score};
  RunOptions options;
  if (config.scheduler.kind == SchedulerKind::kOracle) options.oracle = &oracle;
  RunResult run = run_sequence(sequence->frames, config, nets, options);
  JobResult r;
  r.accuracy_proxy = accuracy_proxy(run.detections, truth);
  r.mean_cost = run.ledger.mean_cost();
  r.key_rate = run.ledger.key_rate();
  r.recompute_fraction = run.ledger.mean_recompute_fraction();
  if (ledger) *ledger = std::move(run.ledger);
  return r;
}

namespace {

// Runs task(0..count-1) on up to `workers` threads; rethrows the first failure.
template <typename Task>
void parallel_for(std::size_t count, int workers, Task task) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t j = next++; j < count; j = next++) {
      try {
        task(j);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

std::vector<CurveRow> run_sweep(const SweepSpec& spec,
                                const std::vector<std::shared_ptr<const SyntheticSequence>>& sequences,
                                const ToyModel& model, const SweepOptions& options) {
  spec.validate();
  require(!sequences.empty(), "sweep: no sequences");
  require(options.workers >= 1, "sweep: workers must be >= 1");
  const std::size_t n_entries = spec.entries.size();
  const std::size_t n_seq = sequences.size();

  std::vector<ToyModel> models(n_entries, model);
  if (options.adapt)
    parallel_for(n_entries, options.workers, [&](std::size_t e) {
      adapt_detector(models[e], spec.entries[e].config, *options.adapt);
    });

  std::vector<JobResult> jobs(n_entries * n_seq);
  parallel_for(jobs.size(), options.workers, [&](std::size_t j) {
    jobs[j] = run_job(spec.entries[j / n_seq].config, sequences[j % n_seq], models[j / n_seq],
                      options.flow);
  });

  std::vector<CurveRow> rows;
  rows.reserve(n_entries);
  for (std::size_t e = 0; e < n_entries; ++e) {
    CurveRow row;
    row.label = spec.entries[e].label;
    for (std::size_t s = 0; s < n_seq; ++s) {
      const JobResult& r = jobs[e * n_seq + s];
      row.accuracy_proxy += r.accuracy_proxy;
      row.mean_cost += r.mean_cost;
      row.key_rate += r.key_rate;
      row.recompute_fraction += r.recompute_fraction;
      row.per_sequence.push_back(r);
    }
    const double n = static_cast<double>(n_seq);
    row.accuracy_proxy /= n;
    row.mean_cost /= n;
    row.key_rate /= n;
    row.recompute_fraction /= n;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_curve_csv(std::ostream& out, const std::vector<CurveRow>& rows) {
  out << "label,accuracy_proxy,mean_cost,key_rate,recompute_fraction\n";
  const auto old_precision = out.precision(17);
  for (const auto& r : rows)
    out << r.label << ',' << r.accuracy_proxy << ',' << r.mean_cost << ',' << r.key_rate << ','
        << r.recompute_fraction << '\n';
  out.precision(old_precision);
}

}  // namespace avp
