#include "avp/synthetic.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>

#include "avp/rng.hpp"

namespace avp {
namespace {

struct BackgroundLook {
  std::array<double, 3> base{};
  std::array<double, 2> freq_y{}, freq_x{}, phase{};
  double amplitude = 0.05;
};

struct ObjectLook {
  std::array<double, 3> color{};
  double freq_y = 0.0, freq_x = 0.0;
};

constexpr std::array<std::array<double, 3>, 3> kClassColors = {{
    {0.90, 0.45, 0.35},
    {0.40, 0.85, 0.45},
    {0.45, 0.50, 0.90},
}};

BackgroundLook random_background(Rng& rng) {
  BackgroundLook b;
  const double gray = rng.uniform(0.15, 0.35);
  for (auto& c : b.base) c = gray + rng.uniform(-0.03, 0.03);
  for (int m = 0; m < 2; ++m) {
    b.freq_y[m] = rng.uniform(0.1, 0.5);
    b.freq_x[m] = rng.uniform(0.1, 0.5);
    b.phase[m] = rng.uniform(0.0, 6.283185307179586);
  }
  return b;
}

class SceneBuilder {
 public:
  SceneBuilder(const GeneratorSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {}

  void new_scene(SceneState& s) {
    s.scene = next_scene_++;
    s.bg_y = 0.0;
    s.bg_x = 0.0;
    s.objects.clear();
    backgrounds_.push_back(random_background(rng_));
    for (int n = 0; n < spec_.initial_objects; ++n) spawn(s);
  }

  void spawn(SceneState& s) {
    ObjectState o;
    o.id = next_id_++;
    o.label = rng_.uniform_int(0, static_cast<int>(kClassColors.size()) - 1);
    o.h = rng_.uniform(spec_.min_object_size, spec_.max_object_size);
    o.w = rng_.uniform(spec_.min_object_size, spec_.max_object_size);
    o.y = rng_.uniform(0.0, std::max(0.0, spec_.height - o.h));
    o.x = rng_.uniform(0.0, std::max(0.0, spec_.width - o.w));
    o.vy = rng_.uniform(-spec_.max_speed, spec_.max_speed);
    o.vx = rng_.uniform(-spec_.max_speed, spec_.max_speed);
    o.phase = rng_.uniform(0.0, 6.283185307179586);
    ObjectLook look;
    for (int c = 0; c < 3; ++c)
      look.color[c] = kClassColors[static_cast<std::size_t>(o.label)][c] + rng_.uniform(-0.05, 0.05);
    look.freq_y = rng_.uniform(0.6, 1.4);
    look.freq_x = rng_.uniform(0.6, 1.4);
    looks_.push_back(look);
    s.objects.push_back(o);
  }

  const BackgroundLook& background(int scene) const {
    return backgrounds_[static_cast<std::size_t>(scene)];
  }
  const ObjectLook& look(int id) const { return looks_[static_cast<std::size_t>(id)]; }

 private:
  const GeneratorSpec& spec_;
  Rng& rng_;
  int next_scene_ = 0;
  int next_id_ = 0;
  std::vector<BackgroundLook> backgrounds_;
  std::vector<ObjectLook> looks_;
};

bool covers(const ObjectState& o, double py, double px) {
  return py >= o.y && py < o.y + o.h && px >= o.x && px < o.x + o.w;
}

// Fraction of the unit pixel [y, y+1) x [x, x+1) inside the object, so
// sub-pixel motion moves edges smoothly.
double coverage(const ObjectState& o, int y, int x) {
  const double cy = std::clamp(std::min(o.y + o.h, y + 1.0) - std::max(o.y, double(y)), 0.0, 1.0);
  const double cx = std::clamp(std::min(o.x + o.w, x + 1.0) - std::max(o.x, double(x)), 0.0, 1.0);
  return cy * cx;
}

Image render(const GeneratorSpec& spec, const SceneState& s, const SceneBuilder& builder,
             Rng& noise) {
  Image img(spec.height, spec.width, 3);
  const BackgroundLook& bg = builder.background(s.scene);
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      const double py = y + 0.5, px = x + 0.5;
      const double by = py - s.bg_y, bx = px - s.bg_x;
      double tex = 0.0;
      for (int m = 0; m < 2; ++m) tex += std::sin(bg.freq_y[m] * by + bg.freq_x[m] * bx + bg.phase[m]);
      std::array<double, 3> color;
      for (int c = 0; c < 3; ++c) color[c] = bg.base[c] + bg.amplitude * tex;
      for (const auto& o : s.objects) {
        const double a = coverage(o, y, x);
        if (a <= 0.0) continue;
        const ObjectLook& look = builder.look(o.id);
        const double t = spec.texture_amplitude *
                         std::sin(look.freq_y * (py - o.y) + look.freq_x * (px - o.x) + o.phase);
        for (int c = 0; c < 3; ++c) color[c] = a * (look.color[c] + t) + (1.0 - a) * color[c];
      }
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = color[c];
    }
  }

  if (s.deterioration > 0.0) {
    // Defocus: 3x3 box blur, then contrast pulled toward the frame mean.
    std::array<double, 3> mean{};
    for (int y = 0; y < spec.height; ++y)
      for (int x = 0; x < spec.width; ++x)
        for (int c = 0; c < 3; ++c) mean[c] += img.at(y, x, c);
    for (auto& m : mean) m /= static_cast<double>(img.positions());
    Image blurred(spec.height, spec.width, 3);
    for (int y = 0; y < spec.height; ++y) {
      for (int x = 0; x < spec.width; ++x) {
        for (int c = 0; c < 3; ++c) {
          double acc = 0.0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx)
              acc += img.at(std::clamp(y + dy, 0, spec.height - 1),
                            std::clamp(x + dx, 0, spec.width - 1), c);
          blurred.at(y, x, c) = mean[c] + (1.0 - s.deterioration) * (acc / 9.0 - mean[c]);
        }
      }
    }
    img = std::move(blurred);
  }

  if (spec.noise_sigma > 0.0)
    for (auto& v : img.data()) v += noise.normal(0.0, spec.noise_sigma);
  for (auto& v : img.data()) v = std::clamp(v, 0.0, 1.0);
  return img;
}

std::vector<GroundTruthObject> visible_objects(const GeneratorSpec& spec, const SceneState& s) {
  std::vector<GroundTruthObject> out;
  for (const auto& o : s.objects) {
    Box b{std::max(0.0, o.x), std::max(0.0, o.y), std::min<double>(spec.width, o.x + o.w),
          std::min<double>(spec.height, o.y + o.h)};
    if (b.area() >= 0.5 * o.w * o.h && b.area() >= 4.0) out.push_back({o.id, o.label, b});
  }
  return out;
}

void advance_object(const GeneratorSpec& spec, ObjectState& o, double speed_factor) {
  auto move = [&] {
    return std::pair{o.y + o.vy * speed_factor + spec.pan_vy, o.x + o.vx * speed_factor + spec.pan_vx};
  };
  auto [ny, nx] = move();
  if (spec.bounce) {
    bool reflected = false;
    if (ny < -0.3 * o.h || ny + 0.7 * o.h > spec.height) {
      o.vy = -o.vy;
      reflected = true;
    }
    if (nx < -0.3 * o.w || nx + 0.7 * o.w > spec.width) {
      o.vx = -o.vx;
      reflected = true;
    }
    if (reflected) std::tie(ny, nx) = move();
  }
  o.y = ny;
  o.x = nx;
}

}  // namespace

void GeneratorSpec::validate() const {
  require(height >= 4 && width >= 4, "generator: frames must be at least 4x4");
  require(height % 2 == 0 && width % 2 == 0, "generator: frame size must be even");
  require(frames >= 1, "generator: at least one frame");
  require(initial_objects >= 0 && max_objects >= initial_objects, "generator: bad object counts");
  require(min_object_size > 0.0 && max_object_size >= min_object_size,
          "generator: bad object size range");
  require(max_speed >= 0.0 && blur_length >= 1 && fast_length >= 1 && still_length >= 1,
          "generator: bad motion knobs");
  for (double p : {spawn_rate, despawn_rate, cut_rate, blur_rate, fast_rate, still_rate})
    require(p >= 0.0 && p <= 1.0, "generator: event rates must lie in [0, 1]");
  require(blur_strength >= 0.0 && blur_strength <= 1.0, "generator: blur strength in [0, 1]");
  require(noise_sigma >= 0.0, "generator: negative noise");
}

GeneratorSpec deteriorated_benchmark_spec() {
  GeneratorSpec s;
  s.frames = 100;
  s.initial_objects = 2;
  s.max_objects = 4;
  s.max_speed = 0.6;
  s.spawn_rate = 0.06;
  s.despawn_rate = 0.02;
  s.blur_rate = 0.06;
  s.blur_length = 4;
  s.blur_strength = 0.6;
  s.fast_rate = 0.03;
  s.still_rate = 0.03;
  s.still_length = 15;
  s.noise_sigma = 0.01;
  return s;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kSceneCut: return "cut";
    case EventKind::kBlur: return "blur";
    case EventKind::kFastMotion: return "fast";
    case EventKind::kSpawn: return "spawn";
    case EventKind::kDespawn: return "despawn";
    case EventKind::kStill: return "still";
  }
  return "cut";
}

SyntheticSequence generate_sequence(const GeneratorSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(derive_seed(seed, 0));
  Rng noise(derive_seed(seed, 1));
  SceneBuilder builder(spec, rng);

  SyntheticSequence seq;
  seq.spec = spec;
  seq.seed = seed;

  SceneState state;
  builder.new_scene(state);
  int blur_left = 0, fast_left = 0, still_left = 0;
  for (int t = 0; t < spec.frames; ++t) {
    if (t > 0) {
      const bool cut = std::ranges::find(spec.cut_frames, t) != spec.cut_frames.end() ||
                       rng.bernoulli(spec.cut_rate);
      if (cut) {
        builder.new_scene(state);
        seq.events.push_back({EventKind::kSceneCut, t, 1});
      } else {
        const double factor = still_left > 0 ? 0.0 : fast_left > 0 ? spec.fast_factor : 1.0;
        for (auto& o : state.objects) {
          advance_object(spec, o, factor);
          o.phase += spec.appearance_change;
        }
        state.bg_y += spec.pan_vy;
        state.bg_x += spec.pan_vx;
        for (std::size_t n = state.objects.size(); n-- > 0;) {
          if (state.objects.size() > 1 && rng.bernoulli(spec.despawn_rate)) {
            seq.events.push_back({EventKind::kDespawn, t, 1});
            state.objects.erase(state.objects.begin() + static_cast<std::ptrdiff_t>(n));
          }
        }
        if (static_cast<int>(state.objects.size()) < spec.max_objects &&
            rng.bernoulli(spec.spawn_rate)) {
          builder.spawn(state);
          seq.events.push_back({EventKind::kSpawn, t, 1});
        }
      }
      if (blur_left > 0) --blur_left;
      if (fast_left > 0) --fast_left;
      if (still_left > 0) --still_left;
      if (blur_left == 0 && rng.bernoulli(spec.blur_rate)) {
        blur_left = spec.blur_length;
        seq.events.push_back({EventKind::kBlur, t, spec.blur_length});
      }
      if (fast_left == 0 && rng.bernoulli(spec.fast_rate)) {
        fast_left = spec.fast_length;
        seq.events.push_back({EventKind::kFastMotion, t, spec.fast_length});
      }
      // Drawn only when enabled so sequences without still episodes keep their stream.
      if (spec.still_rate > 0.0 && still_left == 0 && rng.bernoulli(spec.still_rate)) {
        still_left = spec.still_length;
        seq.events.push_back({EventKind::kStill, t, spec.still_length});
      }
    }
    state.deterioration = blur_left > 0 ? spec.blur_strength : 0.0;
    seq.frames.push_back(render(spec, state, builder, noise));
    seq.gt_objects.push_back(visible_objects(spec, state));
    seq.states.push_back(state);
  }

  seq.gt_flow.reserve(seq.frames.size());
  seq.gt_flow.emplace_back(spec.height, spec.width);
  for (int t = 1; t < spec.frames; ++t) seq.gt_flow.push_back(seq.motion_between(t, t - 1));
  return seq;
}

MotionField SyntheticSequence::motion_between(int cur, int key) const {
  require(cur >= 0 && key >= 0 && cur < static_cast<int>(states.size()) &&
              key < static_cast<int>(states.size()),
          "motion_between: frame out of range");
  MotionField m(spec.height, spec.width);
  const SceneState& sc = states[static_cast<std::size_t>(cur)];
  const SceneState& sk = states[static_cast<std::size_t>(key)];
  if (sc.scene != sk.scene) return m;
  for (int y = 0; y < spec.height; ++y) {
    for (int x = 0; x < spec.width; ++x) {
      double dy = sk.bg_y - sc.bg_y, dx = sk.bg_x - sc.bg_x;
      for (auto it = sc.objects.rbegin(); it != sc.objects.rend(); ++it) {
        if (!covers(*it, y + 0.5, x + 0.5)) continue;
        const auto match = std::ranges::find(sk.objects, it->id, &ObjectState::id);
        if (match != sk.objects.end()) {
          dy = match->y - it->y;
          dx = match->x - it->x;
        }
        break;
      }
      m.set(y, x, dy, dx);
    }
  }
  return m;
}

std::vector<std::vector<Box>> SyntheticSequence::gt_boxes() const {
  std::vector<std::vector<Box>> out;
  out.reserve(gt_objects.size());
  for (const auto& frame : gt_objects) {
    std::vector<Box> boxes;
    for (const auto& o : frame) boxes.push_back(o.box);
    out.push_back(std::move(boxes));
  }
  return out;
}

BinaryMask SyntheticSequence::object_mask(int frame) const {
  BinaryMask mask(spec.height, spec.width);
  const SceneState& s = states[static_cast<std::size_t>(frame)];
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x)
      for (const auto& o : s.objects)
        if (covers(o, y + 0.5, x + 0.5)) mask.at(y, x) = 1;
  return mask;
}

std::uint64_t sequence_checksum(const SyntheticSequence& seq) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& f : seq.frames)
    for (double v : f.data()) mix(std::bit_cast<std::uint64_t>(v));
  for (const auto& m : seq.gt_flow)
    for (double v : m.data()) mix(std::bit_cast<std::uint64_t>(v));
  for (const auto& frame : seq.gt_objects) {
    mix(frame.size());
    for (const auto& o : frame) {
      mix(static_cast<std::uint64_t>(o.id));
      for (double v : {o.box.x0, o.box.y0, o.box.x1, o.box.y1}) mix(std::bit_cast<std::uint64_t>(v));
    }
  }
  return h;
}

}  // namespace avp
