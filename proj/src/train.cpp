#include "avp/train.hpp"

#include <cmath>
#include <sstream>

#include "avp/partial_update.hpp"
#include "avp/warp.hpp"

namespace avp {
namespace {

void sgd(std::vector<double>& params, const std::vector<double>& grad, double lr) {
  for (std::size_t n = 0; n < params.size(); ++n) params[n] -= lr * grad[n];
}

void sgd(DetectorParams& params, const DetectorParams& grad, double lr) {
  sgd(params.objectness_w, grad.objectness_w, lr);
  params.objectness_b -= lr * grad.objectness_b;
  sgd(params.box_w, grad.box_w, lr);
  for (int j = 0; j < 4; ++j) params.box_b[j] -= lr * grad.box_b[j];
}

void add(DetectorParams& acc, const DetectorParams& g) {
  for (std::size_t n = 0; n < acc.objectness_w.size(); ++n) acc.objectness_w[n] += g.objectness_w[n];
  acc.objectness_b += g.objectness_b;
  for (std::size_t n = 0; n < acc.box_w.size(); ++n) acc.box_w[n] += g.box_w[n];
  for (int j = 0; j < 4; ++j) acc.box_b[j] += g.box_b[j];
}

void scale(DetectorParams& p, double s) {
  for (auto& v : p.objectness_w) v *= s;
  p.objectness_b *= s;
  for (auto& v : p.box_w) v *= s;
  for (auto& v : p.box_b) v *= s;
}

}  // namespace

ToyModel ToyModel::reference(std::uint64_t seed) {
  auto feature = std::make_shared<const ConvFeatureNet>(
      ConvFeatureNet::reference(derive_seed(seed, 1)));
  const int channels = feature->out_channels();
  return ToyModel{feature, QualityHead::calibrated(),
                  LinearDetector::initial(channels, 2.0, derive_seed(seed, 2)),
                  Embedder::seeded(channels, Embedder::kDefaultDim, derive_seed(seed, 3)),
                  CostModel{}};
}

Networks ToyModel::networks_for(std::shared_ptr<const SyntheticSequence> sequence,
                                FlowKind flow) const {
  Networks nets;
  nets.feature = feature;
  if (flow == FlowKind::kGroundTruth) {
    require(sequence != nullptr, "networks_for: ground-truth flow needs the sequence");
    nets.flow = std::make_shared<const GroundTruthFlow>(std::move(sequence), quality);
  } else {
    nets.flow = std::make_shared<const BlockMatchingFlow>(quality);
  }
  nets.detector = std::make_shared<const LinearDetector>(detector);
  nets.embedder = embedder;
  nets.cost = cost;
  return nets;
}

TrainSampler::TrainSampler(std::vector<std::shared_ptr<const SyntheticSequence>> pool,
                           int max_offset, std::uint64_t seed)
    : pool_(std::move(pool)), max_offset_(max_offset), rng_(seed) {
  require(!pool_.empty(), "TrainSampler: empty sequence pool");
  require(max_offset >= 1, "TrainSampler: max_offset must be >= 1");
  for (const auto& s : pool_)
    require(s && static_cast<int>(s->size()) > max_offset,
            "TrainSampler: sequences must be longer than max_offset");
}

MaskForcing TrainSampler::next_forcing() {
  const double u = rng_.uniform();
  if (u < 1.0 / 3.0) return MaskForcing::kForceZero;
  if (u < 2.0 / 3.0) return MaskForcing::kForceOne;
  return MaskForcing::kFree;
}

TrainSample TrainSampler::next() {
  const auto& seq = *pool_[static_cast<std::size_t>(
      rng_.uniform_int(0, static_cast<int>(pool_.size()) - 1))];
  const int offset = rng_.uniform_int(1, max_offset_);
  const int key = rng_.uniform_int(0, static_cast<int>(seq.size()) - 1 - offset);
  const int cur = key + offset;
  TrainSample s;
  s.key_image = seq.frames[static_cast<std::size_t>(key)];
  s.cur_image = seq.frames[static_cast<std::size_t>(cur)];
  s.motion = seq.motion_between(cur, key);
  for (const auto& o : seq.gt_objects[static_cast<std::size_t>(cur)]) s.truth.push_back(o.box);
  s.forcing = next_forcing();
  s.offset = offset;
  return s;
}

void TrainConfig::validate() const {
  require(lambda >= 0.0, "train: lambda must be >= 0");
  require(steps >= 1, "train: steps must be >= 1");
  require(lr > 0.0 && lr_late > 0.0, "train: learning rates must be positive");
  require(quality_lr_scale >= 0.0 && detector_lr_scale >= 0.0,
          "train: learning-rate scales must be >= 0");
}

SampleGradients sample_gradients(const ToyModel& model, const TrainSample& sample,
                                 double lambda, double tau) {
  const FeatureNetwork& net = *model.feature;
  const FeatureMap f_key = net.features(sample.key_image);
  const FeatureMap f_cur = net.features(sample.cur_image);
  const int fh = f_cur.height(), fw = f_cur.width();
  const double positions = static_cast<double>(fh * fw);

  const FeatureMap propagated = warp(f_key, resample_motion_bilinear(sample.motion, fh, fw));
  const auto phi = QualityHead::features(sample.key_image, sample.cur_image, sample.motion, fh, fw);
  const QualityMap q = model.quality.evaluate(phi);

  ScalarPlane u(fh, fw), keep(fh, fw);
  double area = 0.0;
  for (int y = 0; y < fh; ++y) {
    for (int x = 0; x < fw; ++x) {
      double v = q.at(y, x) <= tau ? 1.0 : 0.0;
      if (sample.forcing == MaskForcing::kForceZero) v = 0.0;
      if (sample.forcing == MaskForcing::kForceOne) v = 1.0;
      u.at(y, x) = v;
      keep.at(y, x) = 1.0 - v;
      area += v;
    }
  }

  SampleGradients g;
  g.updated = elementwise_blend(f_cur, propagated, u, keep);
  // The training key starts its chain, so its aggregated feature is F_k.
  g.output = aggregate_recursive(propagated, g.updated, model.embedder);

  const DetectionTargets targets = make_targets(sample.truth, fh, fw, model.detector.cell_size());
  DetectionLoss det = model.detector.loss(g.output, targets);
  g.det_loss = det.value / positions;
  g.update_area = area / positions;
  g.loss = (det.value + lambda * area) / positions;
  g.grad_detector = std::move(det.grad_params);
  scale(g.grad_detector, 1.0 / positions);

  if (sample.forcing != MaskForcing::kFree) return g;

  const auto back =
      aggregate_recursive_backward(propagated, g.updated, model.embedder, det.grad_features);
  const BlendGradients blend = blend_backward(f_cur, propagated, u, keep, back.grad_cur);
  for (int y = 0; y < fh; ++y) {
    for (int x = 0; x < fw; ++x) {
      const double dl_du = blend.grad_w_a.at(y, x) - blend.grad_w_b.at(y, x) + lambda;
      const double dl_dq = dl_du * ste_gradient(q.at(y, x), tau) / positions;
      g.grad_quality_b += dl_dq;
      for (int j = 0; j < QualityHead::kFeatures; ++j)
        g.grad_quality_w[static_cast<std::size_t>(j)] += dl_dq * phi[static_cast<std::size_t>(j)].at(y, x);
    }
  }
  return g;
}

TrainResult train_joint(ToyModel& model, TrainSampler& sampler, const TrainConfig& config) {
  config.validate();
  TrainResult result;
  result.loss.reserve(static_cast<std::size_t>(config.steps));
  const int switch_step = (2 * config.steps + 2) / 3;
  for (int step = 0; step < config.steps; ++step) {
    const double lr = step < switch_step ? config.lr : config.lr_late;
    const TrainSample sample = sampler.next();
    const SampleGradients g = sample_gradients(model, sample, config.lambda, config.tau);
    if (!std::isfinite(g.loss)) {
      std::ostringstream msg;
      msg << "training diverged at step " << step << ": loss " << g.loss << " (detection "
          << g.det_loss << ", update area " << g.update_area << ")";
      throw TrainingDiverged(msg.str());
    }
    result.loss.push_back(g.loss);
    result.update_area.push_back(g.update_area);
    const double lq = lr * config.quality_lr_scale;
    for (int j = 0; j < QualityHead::kFeatures; ++j)
      model.quality.weights()[static_cast<std::size_t>(j)] -= lq * g.grad_quality_w[static_cast<std::size_t>(j)];
    model.quality.bias() -= lq * g.grad_quality_b;
    sgd(model.detector.params(), g.grad_detector, lr * config.detector_lr_scale);
  }
  return result;
}

namespace {

struct DetectorSample {
  FeatureMap feature;
  DetectionTargets targets;
};

DetectorSample detector_sample(FeatureMap feature, const std::vector<Box>& truth, double cell_size) {
  DetectionTargets t = make_targets(truth, feature.height(), feature.width(), cell_size);
  return {std::move(feature), std::move(t)};
}

// Minibatch SGD on the mean per-position loss. Returns the batch loss per step.
std::vector<double> fit_detector(LinearDetector& detector, const std::vector<DetectorSample>& samples,
                                 int steps, int batch, double lr, std::uint64_t seed, const char* what) {
  require(!samples.empty(), std::string(what) + ": no samples");
  require(steps >= 0 && batch >= 1 && lr > 0.0, std::string(what) + ": bad schedule");
  Rng rng(seed);
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(steps));
  // Same two-phase schedule as joint training: lr, then lr / 10.
  const int switch_step = (2 * steps + 2) / 3;
  const int last = static_cast<int>(samples.size()) - 1;
  for (int step = 0; step < steps; ++step) {
    DetectorParams grad = DetectorParams::zeros(static_cast<int>(detector.params().objectness_w.size()));
    double value = 0.0;
    double positions = 0.0;
    for (int b = 0; b < batch; ++b) {
      const auto& s = samples[static_cast<std::size_t>(rng.uniform_int(0, last))];
      const DetectionLoss loss = detector.loss(s.feature, s.targets);
      value += loss.value;
      positions += static_cast<double>(s.feature.positions());
      add(grad, loss.grad_params);
    }
    if (!std::isfinite(value))
      throw TrainingDiverged(std::string(what) + " diverged at step " + std::to_string(step));
    trace.push_back(value / positions);
    scale(grad, 1.0 / positions);
    sgd(detector.params(), grad, step < switch_step ? lr : 0.1 * lr);
  }
  return trace;
}

}  // namespace

std::vector<double> pretrain_detector(
    ToyModel& model, const std::vector<std::shared_ptr<const SyntheticSequence>>& pool,
    int steps, double lr, std::uint64_t seed) {
  require(!pool.empty(), "pretrain_detector: empty pool");
  std::vector<DetectorSample> samples;
  for (const auto& seq : pool) {
    const auto truth = seq->gt_boxes();
    for (std::size_t i = 0; i < seq->size(); ++i)
      samples.push_back(detector_sample(model.feature->features(seq->frames[i]), truth[i],
                                        model.detector.cell_size()));
  }
  return fit_detector(model.detector, samples, steps, 1, lr, seed, "detector pretraining");
}

std::vector<double> adapt_detector(ToyModel& model, const PipelineConfig& config,
                                   const AdaptationSpec& spec) {
  require(!spec.pool.empty(), "adapt_detector: empty pool");
  std::vector<DetectorSample> samples;
  for (const auto& seq : spec.pool) {
    const auto truth = seq->gt_boxes();
    OracleContext oracle{truth, frame_hit_score};
    RunOptions options;
    options.keep_features = true;
    if (config.scheduler.kind == SchedulerKind::kOracle) options.oracle = &oracle;
    RunResult run =
        run_sequence(seq->frames, config, model.networks_for(seq, spec.flow), options);
    for (std::size_t i = 0; i < seq->size(); ++i)
      samples.push_back(detector_sample(std::move(run.features[i]), truth[i], model.detector.cell_size()));
  }
  return fit_detector(model.detector, samples, spec.steps, spec.batch, spec.lr, spec.seed,
                      "detector adaptation");
}

std::vector<double> fit_embedding_offset(
    const ToyModel& model, const std::vector<std::shared_ptr<const SyntheticSequence>>& pool) {
  const int channels = model.feature->out_channels();
  std::vector<double> sum_obj(static_cast<std::size_t>(channels), 0.0), sum_bg = sum_obj;
  long n_obj = 0, n_bg = 0;
  for (const auto& seq : pool) {
    const auto truth = seq->gt_boxes();
    for (std::size_t i = 0; i < seq->size(); ++i) {
      const FeatureMap f = model.feature->features(seq->frames[i]);
      const DetectionTargets t = make_targets(truth[i], f.height(), f.width(), model.detector.cell_size());
      for (int y = 0; y < f.height(); ++y) {
        for (int x = 0; x < f.width(); ++x) {
          const bool obj = t.positive.at(y, x) != 0;
          auto& sum = obj ? sum_obj : sum_bg;
          (obj ? n_obj : n_bg)++;
          for (int c = 0; c < channels; ++c) sum[static_cast<std::size_t>(c)] += f.at(y, x, c);
        }
      }
    }
  }
  require(n_obj > 0 && n_bg > 0, "fit_embedding_offset: pool lacks objects or background");
  std::vector<double> centre(static_cast<std::size_t>(channels));
  for (std::size_t c = 0; c < centre.size(); ++c)
    centre[c] = 0.5 * (sum_obj[c] / static_cast<double>(n_obj) + sum_bg[c] / static_cast<double>(n_bg));
  return centre;
}

double mean_recompute_fraction(const ToyModel& model, TrainSampler& sampler, int samples,
                               double tau) {
  require(samples > 0, "mean_recompute_fraction: samples must be positive");
  double total = 0.0;
  for (int n = 0; n < samples; ++n) {
    const TrainSample s = sampler.next();
    const FeatureMap f = model.feature->features(s.cur_image);
    const auto phi = QualityHead::features(s.key_image, s.cur_image, s.motion, f.height(), f.width());
    total += build_update_mask(model.quality.evaluate(phi), tau).recompute_fraction;
  }
  return total / samples;
}

std::vector<std::shared_ptr<const SyntheticSequence>> make_sequence_pool(const GeneratorSpec& spec,
                                                                         int count,
                                                                         std::uint64_t seed) {
  require(count >= 1, "make_sequence_pool: count must be >= 1");
  std::vector<std::shared_ptr<const SyntheticSequence>> pool;
  for (int n = 0; n < count; ++n)
    pool.push_back(std::make_shared<const SyntheticSequence>(
        generate_sequence(spec, derive_seed(seed, static_cast<std::uint64_t>(n)))));
  return pool;
}

ToyModel build_model(const ModelRecipe& recipe, TrainResult* trace) {
  ToyModel model = ToyModel::reference(recipe.seed);
  const auto pool = make_sequence_pool(recipe.generator, recipe.train_sequences,
                                       derive_seed(recipe.seed, 100));
  model.embedder = model.embedder.with_offset(fit_embedding_offset(model, pool));
  pretrain_detector(model, pool, recipe.pretrain_steps, recipe.pretrain_lr,
                    derive_seed(recipe.seed, 101));
  TrainSampler sampler(pool, recipe.max_offset, derive_seed(recipe.seed, 102));
  TrainResult result = train_joint(model, sampler, recipe.train);
  if (trace) *trace = std::move(result);
  return model;
}

}  // namespace avp
