#include <gtest/gtest.h>

#include "avp/pipeline.hpp"
#include "avp/schedule.hpp"
#include "support.hpp"

namespace avp {
namespace {

// 10 x 10 map with `low` positions at -1 and the rest at +1.
QualityMap with_low(int low) {
  QualityMap q(10, 10, 1.0);
  for (int n = 0; n < low; ++n) q.values()[n] = -1.0;
  return q;
}

TEST(Adaptive, TruthTable) {
  EXPECT_TRUE(is_key_adaptive(with_low(30), 0.0, 0.2));
  EXPECT_FALSE(is_key_adaptive(with_low(10), 0.0, 0.2));
  EXPECT_FALSE(is_key_adaptive(with_low(20), 0.0, 0.2));  // strict
  EXPECT_TRUE(is_key_adaptive(with_low(21), 0.0, 0.2));
  EXPECT_EQ(low_quality_fraction(with_low(37), 0.0), 0.37);
}

TEST(Adaptive, AllLowFiresForAnyGammaBelowOne) {
  for (double g : {0.0, 0.2, 0.5, 0.999}) EXPECT_TRUE(is_key_adaptive(with_low(100), 0.0, g));
  EXPECT_FALSE(is_key_adaptive(with_low(100), 0.0, 1.0));
}

TEST(Adaptive, MonotoneInGammaAndTau) {
  Rng rng(1);
  for (int k = 0; k < 1000; ++k) {
    QualityMap q(rng.uniform_int(1, 8), rng.uniform_int(1, 8));
    for (double& v : q.values()) v = rng.uniform(-1.0, 1.0);
    const double tau = rng.uniform(-1.0, 1.0), gamma = rng.uniform();
    const double tau_up = tau + rng.uniform(0.0, 0.5), gamma_up = std::min(1.0, gamma + rng.uniform(0.0, 0.3));
    // Raising gamma never turns a non-key into a key; raising tau never the reverse.
    ASSERT_LE(is_key_adaptive(q, tau, gamma_up), is_key_adaptive(q, tau, gamma));
    ASSERT_GE(is_key_adaptive(q, tau_up, gamma), is_key_adaptive(q, tau, gamma));
  }
}

TEST(Fixed, Modulus) {
  EXPECT_TRUE(is_key_fixed(0, 10));
  EXPECT_TRUE(is_key_fixed(10, 10));
  EXPECT_FALSE(is_key_fixed(11, 10));
  for (int i = 0; i < 20; ++i) EXPECT_TRUE(is_key_fixed(i, 1));
}

TEST(SchedulerConfig, Validation) {
  SchedulerConfig c;
  c.interval = 0;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = {};
  c.gamma = 1.5;
  EXPECT_THROW(c.validate(), ContractViolation);
  EXPECT_EQ(scheduler_kind_from_string(to_string(SchedulerKind::kOracle)), SchedulerKind::kOracle);
  EXPECT_THROW(scheduler_kind_from_string("sometimes"), ContractViolation);
}

TEST(Oracle, TieRulePrefersNonKey) {
  EXPECT_FALSE(oracle_prefers_key(1.0, 1.0));
  EXPECT_TRUE(oracle_prefers_key(2.0, 1.0));
  EXPECT_FALSE(oracle_prefers_key(0.0, 1.0));
}

struct OracleFixture {
  std::shared_ptr<const SyntheticSequence> seq;
  ToyModel model = test::fixture_model(3);
  Networks nets;
  std::vector<std::vector<Box>> truth;
};

OracleFixture make_oracle_fixture(GeneratorSpec spec) {
  OracleFixture f;
  f.seq = std::make_shared<const SyntheticSequence>(generate_sequence(spec, 5));
  f.nets = f.model.networks_for(f.seq);
  f.truth = f.seq->gt_boxes();
  return f;
}

TEST(Oracle, DuplicateFrameIsNotKey) {
  GeneratorSpec s = test::small_fixture_spec();
  s.max_speed = 0.0;
  s.blur_rate = s.fast_rate = s.spawn_rate = s.despawn_rate = s.noise_sigma = 0.0;
  s.frames = 4;
  const OracleFixture f = make_oracle_fixture(s);
  const PipelineConfig config = presets::oracle();
  const StepResult s0 = init(f.seq->frames[0], config, f.nets);
  const OracleContext ctx{f.truth, frame_hit_score};
  const OracleDecision d = is_key_oracle(s0.state, f.seq->frames[1], config, f.nets, ctx);
  EXPECT_FALSE(d.key);
  EXPECT_LE(d.key_score, d.non_key_score);
}

TEST(Oracle, ConstantScorerNeverKeys) {
  const OracleFixture f = make_oracle_fixture(test::small_fixture_spec());
  const PipelineConfig config = presets::oracle();
  const OracleContext ctx{f.truth, [](const Detections&, std::span<const Box>) { return 1.0; }};
  const RunResult r = run_sequence(f.seq->frames, config, f.nets, {false, &ctx});
  EXPECT_EQ(r.ledger.key_count(), 1);
}

TEST(Oracle, SceneCutFiresKey) {
  // Truth is what the detector sees on each frame's own features, so a key
  // frame scores perfectly and propagation from the old scene cannot.
  GeneratorSpec s = test::small_fixture_spec();
  s.max_speed = 0.0;
  s.blur_rate = s.fast_rate = s.spawn_rate = s.despawn_rate = s.noise_sigma = 0.0;
  s.frames = 12;
  s.cut_frames = {6};
  OracleFixture f = make_oracle_fixture(s);
  const RunResult per_frame = run_sequence(f.seq->frames, presets::per_frame(), f.nets);
  f.truth.assign(f.seq->size(), {});
  for (std::size_t i = 0; i < f.seq->size(); ++i)
    for (const auto& d : per_frame.detections[i]) f.truth[i].push_back(d.box);
  ASSERT_FALSE(f.truth[6].empty());

  const PipelineConfig config = presets::oracle();
  const OracleContext ctx{f.truth, frame_hit_score};
  StepResult st = init(f.seq->frames[0], config, f.nets);
  for (int i = 1; i < 6; ++i) {
    const OracleDecision d = is_key_oracle(st.state, f.seq->frames[i], config, f.nets, ctx);
    EXPECT_FALSE(d.key) << "constant segment, frame " << i;
    st = d.chosen;
  }
  const OracleDecision cut = is_key_oracle(st.state, f.seq->frames[6], config, f.nets, ctx);
  EXPECT_TRUE(cut.key);
  EXPECT_GT(cut.key_score, cut.non_key_score);

  const RunResult r = run_sequence(f.seq->frames, config, f.nets, {false, &ctx});
  EXPECT_TRUE(r.ledger.records()[6].is_key);
}

}  // namespace
}  // namespace avp
