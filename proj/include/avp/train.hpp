#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "avp/aggregate.hpp"
#include "avp/pipeline.hpp"
#include "avp/rng.hpp"
#include "avp/synthetic.hpp"
#include "avp/toy_networks.hpp"

namespace avp {

enum class FlowKind { kGroundTruth, kBlockMatching };

// The toy model: fixed feature net and embedder, trainable quality head and
// detector.
struct ToyModel {
  std::shared_ptr<const ConvFeatureNet> feature;
  QualityHead quality;
  LinearDetector detector;
  Embedder embedder;
  CostModel cost;

  // Reference feature net, calibrated quality head, untrained detector.
  static ToyModel reference(std::uint64_t seed);

  // Networks for one sequence (ground-truth flow needs the sequence).
  Networks networks_for(std::shared_ptr<const SyntheticSequence> sequence,
                        FlowKind flow = FlowKind::kGroundTruth) const;
};

enum class MaskForcing { kFree, kForceZero, kForceOne };

struct TrainSample {
  Image key_image;
  Image cur_image;
  MotionField motion;  // M_{cur->key} at image resolution
  std::vector<Box> truth;
  MaskForcing forcing = MaskForcing::kFree;
  int offset = 1;
};

// Draws (key, key + offset) pairs from a pool of sequences. The offset is
// uniform in [1, max_offset]; forcing is zero / one / free with 1/3 each.
class TrainSampler {
 public:
  TrainSampler(std::vector<std::shared_ptr<const SyntheticSequence>> pool, int max_offset,
               std::uint64_t seed);

  TrainSample next();
  MaskForcing next_forcing();

 private:
  std::vector<std::shared_ptr<const SyntheticSequence>> pool_;
  int max_offset_;
  Rng rng_;
};

struct TrainConfig {
  double lambda = 2.0;
  int steps = 2000;
  double lr = 1e-3;
  double lr_late = 1e-4;  // after 2/3 of the steps
  double tau = kDefaultTau;
  // Per-group multipliers on the learning rate.
  double quality_lr_scale = 1.0;
  double detector_lr_scale = 1.0;

  void validate() const;
};

struct TrainResult {
  std::vector<double> loss;         // total loss per step
  std::vector<double> update_area;  // mean U per step
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Forward pass of one training sample and its gradients. The loss is
//   L_det + lambda * sum_p U(p) / positions
// with the update-area gradient routed to the quality head through the STE.
struct SampleGradients {
  double loss = 0.0;
  double det_loss = 0.0;     // summed over cells
  double update_area = 0.0;  // mean of U
  std::array<double, QualityHead::kFeatures> grad_quality_w{};
  double grad_quality_b = 0.0;
  DetectorParams grad_detector;
  FeatureMap updated;   // U * F_i + (1 - U) * F_{k->i}
  FeatureMap output;    // after aggregation
};

SampleGradients sample_gradients(const ToyModel& model, const TrainSample& sample,
                                 double lambda, double tau);

// Joint SGD on the quality head and the detector. Throws TrainingDiverged on
// a non-finite loss.
TrainResult train_joint(ToyModel& model, TrainSampler& sampler, const TrainConfig& config);

// Plain SGD on the detector against single-frame features.
std::vector<double> pretrain_detector(ToyModel& model,
                                      const std::vector<std::shared_ptr<const SyntheticSequence>>& pool,
                                      int steps, double lr, std::uint64_t seed);

// Fine-tunes the detector on the features that `config` actually produces
// over a pool of sequences, so each pipeline is scored with a detector
// trained for its own inference structure.
struct AdaptationSpec {
  std::vector<std::shared_ptr<const SyntheticSequence>> pool;
  int steps = 1000;
  int batch = 16;
  double lr = 10.0;
  std::uint64_t seed = 1;
  FlowKind flow = FlowKind::kGroundTruth;
};

std::vector<double> adapt_detector(ToyModel& model, const PipelineConfig& config,
                                   const AdaptationSpec& spec);

// Class-balanced feature centre: the midpoint of the mean object-cell and
// mean background-cell feature over the pool. Used as the embedder offset.
std::vector<double> fit_embedding_offset(const ToyModel& model,
                                         const std::vector<std::shared_ptr<const SyntheticSequence>>& pool);

// Mean recompute fraction of the free (unforced) mask on `samples` pairs.
double mean_recompute_fraction(const ToyModel& model, TrainSampler& sampler, int samples,
                               double tau);

// Sequences generated from `spec` with seeds derive_seed(seed, n).
std::vector<std::shared_ptr<const SyntheticSequence>> make_sequence_pool(const GeneratorSpec& spec,
                                                                         int count,
                                                                         std::uint64_t seed);

// End-to-end recipe for a usable toy model: detector pretraining on single
// frames, then joint training of the quality head and detector.
struct ModelRecipe {
  std::uint64_t seed = 1;
  GeneratorSpec generator = deteriorated_benchmark_spec();
  int train_sequences = 8;
  int pretrain_steps = 3000;
  double pretrain_lr = 0.5;
  int max_offset = 10;
  TrainConfig train;
};

ToyModel build_model(const ModelRecipe& recipe, TrainResult* trace = nullptr);

}  // namespace avp
