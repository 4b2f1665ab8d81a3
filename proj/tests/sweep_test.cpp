#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "avp/sweep.hpp"
#include "support.hpp"

namespace avp {
namespace {

std::vector<std::shared_ptr<const SyntheticSequence>> sequences() {
  return make_sequence_pool(test::small_fixture_spec(), 3, 77);
}

TEST(StandardSweep, LabelsAndAxes) {
  SweepAxes axes;
  axes.include_oracle = true;
  const SweepSpec spec = standard_sweep(axes);
  std::set<std::string> labels;
  for (const auto& e : spec.entries) {
    EXPECT_TRUE(labels.insert(e.label).second) << "duplicate " << e.label;
    EXPECT_NO_THROW(e.config.validate());
  }
  for (const char* l : {"per_frame", "dff_l1", "dff_l10", "fgfa_r1", "fgfa_r10", "c1_l5", "c2_l10", "c3_g0.2", "oracle"})
    EXPECT_TRUE(labels.contains(l)) << l;
  EXPECT_EQ(spec.entries.size(), 1u + 10 + 10 + 10 + 10 + 7 + 1);
  EXPECT_THROW(SweepSpec{}.validate(), ContractViolation);
}

TEST(RunSweep, BaselineRates) {
  SweepSpec spec;
  spec.add("per_frame", presets::per_frame());
  spec.add("dff_l10", presets::sparse_propagation(10));
  const auto rows = run_sweep(spec, sequences(), test::fixture_model(1));
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].key_rate, 1.0);
  EXPECT_EQ(rows[0].recompute_fraction, 1.0);
  EXPECT_DOUBLE_EQ(rows[1].key_rate, 0.1);
  EXPECT_LT(rows[1].mean_cost, rows[0].mean_cost);
  EXPECT_EQ(rows[0].per_sequence.size(), 3u);
}

std::string sweep_csv(int workers, bool adapt) {
  SweepAxes axes;
  axes.intervals = {2, 5};
  axes.gammas = {0.2};
  axes.radii = {1};
  axes.include_oracle = true;
  SweepOptions options;
  options.workers = workers;
  if (adapt) {
    AdaptationSpec a;
    a.pool = make_sequence_pool(test::small_fixture_spec(), 2, 88);
    a.steps = 40;
    options.adapt = a;
  }
  std::ostringstream out;
  write_curve_csv(out, run_sweep(standard_sweep(axes), sequences(), test::fixture_model(2), options));
  return out.str();
}

TEST(RunSweep, ByteIdenticalAcrossRunsAndWorkerCounts) {
  const std::string a = sweep_csv(1, true);
  EXPECT_EQ(a, sweep_csv(1, true));
  EXPECT_EQ(a, sweep_csv(3, true));
  EXPECT_EQ(sweep_csv(1, false), sweep_csv(2, false));
}

TEST(CurveCsv, Header) {
  std::ostringstream out;
  write_curve_csv(out, {CurveRow{"x", 0.5, 10.0, 0.25, 0.125, {}}});
  EXPECT_EQ(out.str(), "label,accuracy_proxy,mean_cost,key_rate,recompute_fraction\nx,0.5,10,0.25,0.125\n");
}

TEST(RunSweep, PropagatesJobFailures) {
  SweepSpec spec;
  spec.add("oracle", presets::oracle());
  ToyModel broken = test::fixture_model(3);
  broken.feature.reset();
  EXPECT_ANY_THROW(run_sweep(spec, sequences(), broken, {FlowKind::kGroundTruth, 2, std::nullopt}));
}

}  // namespace
}  // namespace avp
