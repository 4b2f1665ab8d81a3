#include "avp/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

namespace avp {

using nlohmann::json;

namespace {

// Reads fields of one JSON object and rejects keys nobody asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    require(j.is_object(), "config: " + where_ + " must be an object");
  }
  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ContractViolation("config: bad value for " + where_ + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items())
      require(seen_.count(item.key()) != 0, "config: unknown key " + where_ + item.key());
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

json to_json(const GeneratorSpec& s) {
  return {{"height", s.height},
          {"width", s.width},
          {"frames", s.frames},
          {"initial_objects", s.initial_objects},
          {"max_objects", s.max_objects},
          {"min_object_size", s.min_object_size},
          {"max_object_size", s.max_object_size},
          {"max_speed", s.max_speed},
          {"pan_vy", s.pan_vy},
          {"pan_vx", s.pan_vx},
          {"bounce", s.bounce},
          {"spawn_rate", s.spawn_rate},
          {"despawn_rate", s.despawn_rate},
          {"cut_rate", s.cut_rate},
          {"cut_frames", s.cut_frames},
          {"blur_rate", s.blur_rate},
          {"blur_length", s.blur_length},
          {"blur_strength", s.blur_strength},
          {"fast_rate", s.fast_rate},
          {"fast_length", s.fast_length},
          {"fast_factor", s.fast_factor},
          {"still_rate", s.still_rate},
          {"still_length", s.still_length},
          {"texture_amplitude", s.texture_amplitude},
          {"appearance_change", s.appearance_change},
          {"noise_sigma", s.noise_sigma}};
}

GeneratorSpec generator_from_json(const json& j, GeneratorSpec s) {
  ObjectReader r(j, "generator.");
  r.read("height", s.height);
  r.read("width", s.width);
  r.read("frames", s.frames);
  r.read("initial_objects", s.initial_objects);
  r.read("max_objects", s.max_objects);
  r.read("min_object_size", s.min_object_size);
  r.read("max_object_size", s.max_object_size);
  r.read("max_speed", s.max_speed);
  r.read("pan_vy", s.pan_vy);
  r.read("pan_vx", s.pan_vx);
  r.read("bounce", s.bounce);
  r.read("spawn_rate", s.spawn_rate);
  r.read("despawn_rate", s.despawn_rate);
  r.read("cut_rate", s.cut_rate);
  r.read("cut_frames", s.cut_frames);
  r.read("blur_rate", s.blur_rate);
  r.read("blur_length", s.blur_length);
  r.read("blur_strength", s.blur_strength);
  r.read("fast_rate", s.fast_rate);
  r.read("fast_length", s.fast_length);
  r.read("fast_factor", s.fast_factor);
  r.read("still_rate", s.still_rate);
  r.read("still_length", s.still_length);
  r.read("texture_amplitude", s.texture_amplitude);
  r.read("appearance_change", s.appearance_change);
  r.read("noise_sigma", s.noise_sigma);
  r.finish();
  return s;
}

json to_json(const TrainConfig& t) {
  return {{"lambda", t.lambda},
          {"steps", t.steps},
          {"lr", t.lr},
          {"lr_late", t.lr_late},
          {"tau", t.tau},
          {"quality_lr_scale", t.quality_lr_scale},
          {"detector_lr_scale", t.detector_lr_scale}};
}

TrainConfig train_from_json(const json& j, TrainConfig t) {
  ObjectReader r(j, "model.train.");
  r.read("lambda", t.lambda);
  r.read("steps", t.steps);
  r.read("lr", t.lr);
  r.read("lr_late", t.lr_late);
  r.read("tau", t.tau);
  r.read("quality_lr_scale", t.quality_lr_scale);
  r.read("detector_lr_scale", t.detector_lr_scale);
  r.finish();
  return t;
}

}  // namespace

std::string_view to_string(FlowKind kind) {
  return kind == FlowKind::kGroundTruth ? "ground_truth" : "block_matching";
}

FlowKind flow_kind_from_string(std::string_view name) {
  if (name == "ground_truth") return FlowKind::kGroundTruth;
  if (name == "block_matching") return FlowKind::kBlockMatching;
  throw ContractViolation("unknown flow kind: " + std::string(name));
}

json to_json(const PipelineConfig& c) {
  json j = {{"do_aggr", c.do_aggr},
            {"do_spatial", c.do_spatial},
            {"scheduler",
             {{"kind", std::string(to_string(c.scheduler.kind))},
              {"interval", c.scheduler.interval},
              {"gamma", c.scheduler.gamma},
              {"tau", c.scheduler.tau}}},
            {"dense_window_r", nullptr},
            {"dense_window", c.dense_window == DenseWindow::kCausal ? "causal" : "two_sided"},
            {"lambda", c.lambda}};
  if (c.dense_window_r) j["dense_window_r"] = *c.dense_window_r;
  return j;
}

PipelineConfig pipeline_from_json(const json& j, PipelineConfig c) {
  ObjectReader r(j, "pipeline.");
  r.read("do_aggr", c.do_aggr);
  r.read("do_spatial", c.do_spatial);
  r.read("lambda", c.lambda);
  if (const json* s = r.child("scheduler")) {
    ObjectReader rs(*s, "pipeline.scheduler.");
    std::string kind(to_string(c.scheduler.kind));
    rs.read("kind", kind);
    c.scheduler.kind = scheduler_kind_from_string(kind);
    rs.read("interval", c.scheduler.interval);
    rs.read("gamma", c.scheduler.gamma);
    rs.read("tau", c.scheduler.tau);
    rs.finish();
  }
  if (const json* r_json = r.child("dense_window_r")) {
    if (r_json->is_null())
      c.dense_window_r.reset();
    else
      c.dense_window_r = r_json->get<int>();
  }
  std::string window = c.dense_window == DenseWindow::kCausal ? "causal" : "two_sided";
  r.read("dense_window", window);
  require(window == "causal" || window == "two_sided", "config: dense_window must be causal or two_sided");
  c.dense_window = window == "causal" ? DenseWindow::kCausal : DenseWindow::kTwoSided;
  r.finish();
  return c;
}

void AppConfig::validate() const {
  generator.validate();
  pipeline.validate();
  model.train.validate();
  require(sequences >= 1, "config: sequences must be >= 1");
  require(workers >= 1, "config: workers must be >= 1");
  require(model.train_sequences >= 1 && model.pretrain_steps >= 0 && model.max_offset >= 1,
          "config: bad model recipe");
  require(!adaptation.enabled || (adaptation.sequences >= 1 && adaptation.steps >= 0 &&
                                  adaptation.batch >= 1 && adaptation.lr > 0.0),
          "config: bad adaptation settings");
}

json to_json(const AppConfig& c) {
  return {{"seed", c.seed},
          {"generator", to_json(c.generator)},
          {"sequences", c.sequences},
          {"pipeline", to_json(c.pipeline)},
          {"flow", std::string(to_string(c.flow))},
          {"axes",
           {{"intervals", c.axes.intervals},
            {"gammas", c.axes.gammas},
            {"radii", c.axes.radii},
            {"include_oracle", c.axes.include_oracle}}},
          {"model",
           {{"train_sequences", c.model.train_sequences},
            {"pretrain_steps", c.model.pretrain_steps},
            {"pretrain_lr", c.model.pretrain_lr},
            {"max_offset", c.model.max_offset},
            {"train", to_json(c.model.train)}}},
          {"adaptation",
           {{"enabled", c.adaptation.enabled},
            {"sequences", c.adaptation.sequences},
            {"steps", c.adaptation.steps},
            {"batch", c.adaptation.batch},
            {"lr", c.adaptation.lr}}},
          {"workers", c.workers}};
}

AppConfig config_from_json(const json& j) {
  AppConfig c;
  ObjectReader r(j, "");
  r.read("seed", c.seed);
  if (const json* g = r.child("generator")) c.generator = generator_from_json(*g, c.generator);
  r.read("sequences", c.sequences);
  if (const json* p = r.child("pipeline")) c.pipeline = pipeline_from_json(*p, c.pipeline);
  std::string flow(to_string(c.flow));
  r.read("flow", flow);
  c.flow = flow_kind_from_string(flow);
  if (const json* a = r.child("axes")) {
    ObjectReader ra(*a, "axes.");
    ra.read("intervals", c.axes.intervals);
    ra.read("gammas", c.axes.gammas);
    ra.read("radii", c.axes.radii);
    ra.read("include_oracle", c.axes.include_oracle);
    ra.finish();
  }
  if (const json* m = r.child("model")) {
    ObjectReader rm(*m, "model.");
    rm.read("train_sequences", c.model.train_sequences);
    rm.read("pretrain_steps", c.model.pretrain_steps);
    rm.read("pretrain_lr", c.model.pretrain_lr);
    rm.read("max_offset", c.model.max_offset);
    if (const json* t = rm.child("train")) c.model.train = train_from_json(*t, c.model.train);
    rm.finish();
  }
  if (const json* a = r.child("adaptation")) {
    ObjectReader ra(*a, "adaptation.");
    ra.read("enabled", c.adaptation.enabled);
    ra.read("sequences", c.adaptation.sequences);
    ra.read("steps", c.adaptation.steps);
    ra.read("batch", c.adaptation.batch);
    ra.read("lr", c.adaptation.lr);
    ra.finish();
  }
  r.read("workers", c.workers);
  r.finish();
  // The model is trained on the benchmark the tool evaluates.
  c.model.generator = c.generator;
  c.model.seed = c.model_seed();
  c.validate();
  return c;
}

void apply_override(json& j, std::string_view dotted_key, std::string_view value) {
  require(!dotted_key.empty(), "config: empty override key");
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = dotted_key.find('.', start);
    const std::string part(dotted_key.substr(start, dot - start));
    require(!part.empty(), "config: malformed key " + std::string(dotted_key));
    if (dot == std::string_view::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*node)[part] = parsed.is_discarded() ? json(std::string(value)) : parsed;
      return;
    }
    node = &(*node)[part];
    start = dot + 1;
  }
}

AppConfig load_config(const std::optional<std::string>& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  json j = json::object();
  if (path) {
    std::ifstream in(*path);
    require(in.good(), "config: cannot open " + *path);
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ContractViolation("config: " + *path + ": " + e.what());
    }
  }
  for (const auto& [key, value] : overrides) apply_override(j, key, value);
  if (const char* env = std::getenv("AVP_SEED")) {
    char* end = nullptr;
    const unsigned long long seed = std::strtoull(env, &end, 10);
    require(end != env && *end == '\0', "AVP_SEED must be a non-negative integer");
    j["seed"] = seed;
  }
  return config_from_json(j);
}

PipelineConfig preset_by_name(std::string_view name, int interval, double gamma, int radius,
                              double lambda) {
  if (name == "per_frame") return presets::per_frame();
  if (name == "dff") return presets::sparse_propagation(interval);
  if (name == "fgfa") return presets::dense_aggregation(radius);
  if (name == "c1") return presets::recursive_aggregation(interval);
  if (name == "c2") return presets::partial_updating(interval, lambda);
  if (name == "c3") return presets::adaptive(gamma, lambda);
  if (name == "oracle") return presets::oracle(lambda);
  throw ContractViolation("unknown preset: " + std::string(name));
}

}  // namespace avp
