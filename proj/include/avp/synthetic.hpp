#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "avp/networks.hpp"
#include "avp/tensor.hpp"

namespace avp {

// Knobs of the moving-shapes generator. Rates are per frame.
struct GeneratorSpec {
  int height = 32;
  int width = 32;
  int frames = 30;

  int initial_objects = 3;
  int max_objects = 5;
  double min_object_size = 6.0;
  double max_object_size = 11.0;
  double max_speed = 1.0;       // px/frame, per axis
  double pan_vy = 0.0;          // background (camera) motion, px/frame
  double pan_vx = 0.0;
  bool bounce = true;           // objects reflect off the image border

  double spawn_rate = 0.0;      // probability of a new object appearing
  double despawn_rate = 0.0;    // probability of an object vanishing
  double cut_rate = 0.0;        // probability of a scene cut
  std::vector<int> cut_frames;  // explicit cuts (frame starts a new scene)

  double blur_rate = 0.0;       // probability a deteriorated episode starts
  int blur_length = 4;
  double blur_strength = 0.7;   // contrast loss inside an episode, [0, 1]
  double fast_rate = 0.0;       // probability a fast-motion episode starts
  int fast_length = 4;
  double fast_factor = 3.0;
  double still_rate = 0.0;      // probability a still episode (no object motion) starts
  int still_length = 8;

  double texture_amplitude = 0.08;
  double appearance_change = 0.0;  // texture phase drift per frame
  double noise_sigma = 0.0;

  void validate() const;
};

// Preset with deteriorated episodes, object churn and quiet stretches.
GeneratorSpec deteriorated_benchmark_spec();

enum class EventKind { kSceneCut, kBlur, kFastMotion, kSpawn, kDespawn, kStill };

std::string_view to_string(EventKind kind);

struct SceneEvent {
  EventKind kind;
  int frame = 0;
  int length = 1;
};

struct GroundTruthObject {
  int id = 0;
  int label = 0;
  Box box;  // visible extent in image pixels
};

// Placement of one object in one frame (continuous top-left corner).
struct ObjectState {
  int id = 0;
  int label = 0;
  double y = 0.0, x = 0.0;
  double h = 0.0, w = 0.0;
  double vy = 0.0, vx = 0.0;
  double phase = 0.0;
};

struct SceneState {
  int scene = 0;              // increments at every cut
  double bg_y = 0.0, bg_x = 0.0;
  double deterioration = 0.0; // 0 = clean
  std::vector<ObjectState> objects;  // drawn in order; later ones on top
};

struct SyntheticSequence {
  GeneratorSpec spec;
  std::uint64_t seed = 0;
  std::vector<Image> frames;
  std::vector<MotionField> gt_flow;  // gt_flow[i] = M_{i -> i-1}; gt_flow[0] is zero
  std::vector<std::vector<GroundTruthObject>> gt_objects;
  std::vector<SceneEvent> events;
  std::vector<SceneState> states;

  std::size_t size() const { return frames.size(); }
  // Backward motion M_{cur -> key} at image resolution. Zero across cuts.
  MotionField motion_between(int cur, int key) const;
  // Object boxes of every frame, for scoring.
  std::vector<std::vector<Box>> gt_boxes() const;
  // Visible-object mask (1 inside any object) of one frame.
  BinaryMask object_mask(int frame) const;
};

SyntheticSequence generate_sequence(const GeneratorSpec& spec, std::uint64_t seed);

// FNV-1a over frame bytes, flows and boxes; pins generator output.
std::uint64_t sequence_checksum(const SyntheticSequence& seq);

}  // namespace avp
