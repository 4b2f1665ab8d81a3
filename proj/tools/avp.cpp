// Command-line front end: generate, run, sweep, train, gradcheck.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "avp/app.hpp"
#include "avp/gradcheck.hpp"
#include "avp/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace avp;

namespace {

// Options every subcommand understands. Each flag becomes a config override.
struct Common {
  std::optional<std::string> config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::optional<int> sequences;
  std::optional<int> frames;
  std::optional<std::string> flow;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "JSON config file");
    app->add_option("--set", sets, "Override a config key: dotted.key=value (repeatable)");
    app->add_option("--seed", seed, "Global seed");
    app->add_option("--workers", workers, "Sweep worker threads");
    app->add_option("--sequences", sequences, "Number of evaluation sequences");
    app->add_option("--frames", frames, "Frames per generated sequence");
    app->add_option("--flow", flow, "ground_truth or block_matching");
  }

  std::vector<std::pair<std::string, std::string>> overrides() const {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw CLI::ValidationError("--set", "expected key=value: " + s);
      out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    if (seed) out.emplace_back("seed", std::to_string(*seed));
    if (workers) out.emplace_back("workers", std::to_string(*workers));
    if (sequences) out.emplace_back("sequences", std::to_string(*sequences));
    if (frames) out.emplace_back("generator.frames", std::to_string(*frames));
    if (flow) out.emplace_back("flow", "\"" + *flow + "\"");
    return out;
  }
};

std::ostream& open_or_stdout(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw std::runtime_error("cannot write " + path);
  return file;
}

void write_boxes(const fs::path& path, const SyntheticSequence& seq) {
  std::ofstream out(path);
  out << "frame,id,label,x0,y0,x1,y1\n" << std::setprecision(17);
  for (std::size_t t = 0; t < seq.size(); ++t)
    for (const auto& o : seq.gt_objects[t])
      out << t << ',' << o.id << ',' << o.label << ',' << o.box.x0 << ',' << o.box.y0 << ','
          << o.box.x1 << ',' << o.box.y1 << '\n';
}

void write_events(const fs::path& path, const SyntheticSequence& seq) {
  std::ofstream out(path);
  out << "kind,frame,length\n";
  for (const auto& e : seq.events) out << to_string(e.kind) << ',' << e.frame << ',' << e.length << '\n';
}

int cmd_generate(const AppConfig& config, const std::string& out_dir) {
  const auto pool = evaluation_sequences(config);
  for (std::size_t n = 0; n < pool.size(); ++n) {
    const auto& seq = *pool[n];
    std::ostringstream name;
    name << "seq_" << std::setw(3) << std::setfill('0') << n;
    const fs::path dir = fs::path(out_dir) / name.str();
    fs::create_directories(dir);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      std::ostringstream stem;
      stem << std::setw(4) << std::setfill('0') << t;
      save_tensor((dir / ("frame_" + stem.str() + ".avpt")).string(), to_raw(seq.frames[t]));
      save_tensor((dir / ("flow_" + stem.str() + ".avpt")).string(), to_raw(seq.gt_flow[t]));
    }
    write_boxes(dir / "boxes.csv", seq);
    write_events(dir / "events.csv", seq);
    std::cout << name.str() << " seed=" << seq.seed << " frames=" << seq.size() << " checksum=0x"
              << std::hex << sequence_checksum(seq) << std::dec << '\n';
  }
  return 0;
}

int cmd_run(const AppConfig& config, const std::string& ledger_dir) {
  const ToyModel base = model_for(config);
  ToyModel model = base;
  const SweepOptions options = sweep_options(config);
  if (options.adapt) adapt_detector(model, config.pipeline, *options.adapt);
  if (!ledger_dir.empty()) fs::create_directories(ledger_dir);

  const auto pool = evaluation_sequences(config);
  std::cout << "sequence,accuracy_proxy,mean_cost,key_rate,recompute_fraction\n" << std::setprecision(17);
  for (std::size_t n = 0; n < pool.size(); ++n) {
    CostLedger ledger;
    const JobResult r = run_job(config.pipeline, pool[n], model, config.flow, &ledger);
    std::cout << n << ',' << r.accuracy_proxy << ',' << r.mean_cost << ',' << r.key_rate << ','
              << r.recompute_fraction << '\n';
    if (!ledger_dir.empty()) {
      std::ofstream out(fs::path(ledger_dir) / ("ledger_" + std::to_string(n) + ".csv"));
      ledger.write_csv(out);
    }
  }
  return 0;
}

int cmd_sweep(const AppConfig& config, const std::string& out_path) {
  std::ofstream file;
  run_configured_sweep(config, open_or_stdout(out_path, file));
  return 0;
}

int cmd_train(const AppConfig& config, const std::string& out_path) {
  TrainResult trace;
  const ToyModel model = model_for(config, &trace);
  std::ofstream file;
  std::ostream& out = open_or_stdout(out_path, file);
  out << "step,loss,update_area\n" << std::setprecision(17);
  for (std::size_t s = 0; s < trace.loss.size(); ++s)
    out << s << ',' << trace.loss[s] << ',' << trace.update_area[s] << '\n';

  TrainSampler probe(make_sequence_pool(config.generator, 4, derive_seed(config.seed, 13)),
                     config.model.max_offset, derive_seed(config.seed, 14));
  const auto& w = model.quality.weights();
  std::cerr << "quality head: w=(" << w[0] << ", " << w[1] << ", " << w[2]
            << ") b=" << model.quality.bias() << '\n'
            << "mean recompute fraction: "
            << mean_recompute_fraction(model, probe, 500, config.model.train.tau) << '\n';
  return 0;
}

int cmd_gradcheck(const GradCheckOptions& options) {
  const GradCheckReport report = gradient_check(options);
  write_report(std::cout, report);
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-based video inference toolkit on synthetic video"};
  app.require_subcommand(1);

  Common common;
  std::string out_dir, ledger_dir, out_path;
  std::optional<std::string> preset;
  std::optional<int> interval, radius, steps;
  std::optional<double> gamma, lambda, tau;

  auto* gen = app.add_subcommand("generate", "Write synthetic sequences as fixture tensors");
  common.attach(gen);
  gen->add_option("--out", out_dir, "Output directory")->required();

  auto* run = app.add_subcommand("run", "Run one pipeline configuration over the sequences");
  common.attach(run);
  run->add_option("--preset", preset, "per_frame, dff, fgfa, c1, c2, c3 or oracle");
  run->add_option("--interval", interval, "Key-frame interval l");
  run->add_option("--gamma", gamma, "Adaptive threshold");
  run->add_option("--radius", radius, "Dense aggregation radius");
  run->add_option("--lambda", lambda, "Update-area penalty");
  run->add_option("--tau", tau, "Quality threshold");
  run->add_option("--ledger-dir", ledger_dir, "Write one ledger CSV per sequence here");

  auto* sweep = app.add_subcommand("sweep", "Run the method matrix and write the curve CSV");
  common.attach(sweep);
  sweep->add_option("--out", out_path, "Curve CSV (default stdout)");

  auto* train = app.add_subcommand("train", "Train the toy model and write the loss trace");
  common.attach(train);
  train->add_option("--out", out_path, "Loss trace CSV (default stdout)");
  train->add_option("--lambda", lambda, "Update-area penalty");
  train->add_option("--steps", steps, "Joint training steps");

  GradCheckOptions gc;
  auto* grad = app.add_subcommand("gradcheck", "Compare analytic gradients with finite differences");
  grad->add_option("--cases", gc.cases, "Cases per component");
  grad->add_option("--seed", gc.seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (grad->parsed()) return cmd_gradcheck(gc);

    auto overrides = common.overrides();
    if (run->parsed()) {
      if (preset) {
        const PipelineConfig p = preset_by_name(*preset, interval.value_or(10), gamma.value_or(0.2),
                                                radius.value_or(1), lambda.value_or(2.0));
        overrides.emplace_back("pipeline", to_json(p).dump());
      }
      if (interval) overrides.emplace_back("pipeline.scheduler.interval", std::to_string(*interval));
      if (gamma) overrides.emplace_back("pipeline.scheduler.gamma", nlohmann::json(*gamma).dump());
      if (tau) overrides.emplace_back("pipeline.scheduler.tau", nlohmann::json(*tau).dump());
      if (radius) overrides.emplace_back("pipeline.dense_window_r", std::to_string(*radius));
      if (lambda) overrides.emplace_back("pipeline.lambda", nlohmann::json(*lambda).dump());
    }
    if (train->parsed()) {
      if (lambda) overrides.emplace_back("model.train.lambda", nlohmann::json(*lambda).dump());
      if (steps) overrides.emplace_back("model.train.steps", std::to_string(*steps));
    }
    const AppConfig config = load_config(common.config_path, overrides);

    if (gen->parsed()) return cmd_generate(config, out_dir);
    if (run->parsed()) return cmd_run(config, ledger_dir);
    if (sweep->parsed()) return cmd_sweep(config, out_path);
    if (train->parsed()) return cmd_train(config, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
