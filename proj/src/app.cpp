#include "avp/app.hpp"

#include <ostream>

namespace avp {

SequencePool evaluation_sequences(const AppConfig& config) {
  return make_sequence_pool(config.generator, config.sequences, config.sequence_seed());
}

ToyModel model_for(const AppConfig& config, TrainResult* trace) {
  return build_model(config.model, trace);
}

SweepOptions sweep_options(const AppConfig& config) {
  SweepOptions options;
  options.flow = config.flow;
  options.workers = config.workers;
  if (config.adaptation.enabled) {
    AdaptationSpec a;
    a.pool = make_sequence_pool(config.generator, config.adaptation.sequences,
                                config.adaptation_seed());
    a.steps = config.adaptation.steps;
    a.batch = config.adaptation.batch;
    a.lr = config.adaptation.lr;
    a.seed = derive_seed(config.adaptation_seed(), 1);
    a.flow = config.flow;
    options.adapt = std::move(a);
  }
  return options;
}

void run_configured_sweep(const AppConfig& config, std::ostream& out) {
  const ToyModel model = model_for(config);
  const auto rows =
      run_sweep(standard_sweep(config.axes), evaluation_sequences(config), model, sweep_options(config));
  write_curve_csv(out, rows);
}

}  // namespace avp
