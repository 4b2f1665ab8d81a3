#pragma once

#include <iosfwd>
#include <memory>
#include <vector>

#include "avp/config.hpp"

namespace avp {

using SequencePool = std::vector<std::shared_ptr<const SyntheticSequence>>;

// Evaluation sequences of a configuration.
SequencePool evaluation_sequences(const AppConfig& config);

// Trained toy model for a configuration.
ToyModel model_for(const AppConfig& config, TrainResult* trace = nullptr);

// Sweep options (flow, workers, adaptation pool) for a configuration.
SweepOptions sweep_options(const AppConfig& config);

// Builds the model, runs the standard method matrix and writes the curve CSV.
void run_configured_sweep(const AppConfig& config, std::ostream& out);

}  // namespace avp
