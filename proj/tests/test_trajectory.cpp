// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "longtrack/evaluation.hpp"
#include "longtrack/synth.hpp"
#include "longtrack/trajectory.hpp"
#include "longtrack/wav.hpp"
#include "testsupport.hpp"

using namespace longtrack;
using testsupport::TempDir;

namespace {

ModelConfig tiny_model() {
  ModelConfig c;
  c.patch_frames = 16;
  c.n_mels = 12;
  c.conv1_channels = 2;
  c.conv2_channels = 3;
  c.embed_dim = 8;
  c.hidden_dim = 4;
  return c;
}

FeatureParams tiny_features() {
  FeatureParams f;
  f.patch_frames = 16;
  f.mel.n_mels = 12;
  return f;
}

void write_tone(const std::string& path, double freq, double s = 0.2) {
  write_wav(path, synth_voice(s, static_cast<std::uint64_t>(freq * 1000)));
}

// participant whose three modalities reuse the same per-day clip trio
Participant make_participant(const TempDir& dir, const std::string& id,
                             const std::vector<int>& days, std::uint64_t seed) {
  Participant p;
  p.id = id;
  for (std::size_t i = 0; i < days.size(); ++i) {
    RecordingSample s;
    s.participant_id = id;
    s.day = days[i];
    s.label = TestLabel::negative;
    const std::string base = dir.str() + "/" + id + "_" + std::to_string(days[i]);
    write_wav(base + "_b.wav", synth_breath(0.3, mix_seed(seed, i * 3)));
    write_wav(base + "_c.wav", synth_cough(0.3, mix_seed(seed, i * 3 + 1)));
    write_wav(base + "_v.wav", synth_voice(0.3, mix_seed(seed, i * 3 + 2)));
    s.breath.path = base + "_b.wav";
    s.cough.path = base + "_c.wav";
    s.voice.path = base + "_v.wav";
    p.samples.push_back(s);
  }
  return p;
}

FeatureCache cache_for(const Participant& p) {
  FeatureCache cache(tiny_features());
  for (const auto& s : p.samples) cache.add_sample(s);
  cache.build(1);
  return cache;
}

}  // namespace

TEST(PredictDay, LookbackExcludesStaleHistory) {
  TempDir dir("traj");
  Participant p = make_participant(dir, "P1", {0, 60}, 1);
  FeatureCache cache = cache_for(p);
  ModelParams params = init_params(tiny_model(), 5);
  // day 0 is outside the 56-day lookback at day 60: only the current sample
  // remains, so the warm-up rule rejects the prediction
  try {
    predict_day(p, 60, params, cache);
    FAIL() << "expected NoHistory";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoHistory);
  }
}

TEST(PredictDay, UsesAvailableHistoryAndIsDeterministic) {
  TempDir dir("traj");
  Participant p = make_participant(dir, "P1", {0, 3}, 2);
  FeatureCache cache = cache_for(p);
  ModelParams params = init_params(tiny_model(), 6);
  const double a = predict_day(p, 3, params, cache);
  const double b = predict_day(p, 3, params, cache);
  EXPECT_EQ(a, b);
  EXPECT_GT(a, 0.0);
  EXPECT_LT(a, 1.0);
}

TEST(PredictDay, CausalityAndLookbackBitExact) {
  TempDir dir("traj");
  Participant p = make_participant(dir, "P1", {0, 58, 60, 70}, 3);
  ModelParams params = init_params(tiny_model(), 7);

  FeatureCache cache_a = cache_for(p);
  const double before_future = predict_day(p, 60, params, cache_a);

  // perturbing a FUTURE sample (day 70) leaves the day-60 prediction unchanged
  write_wav(dir.str() + "/P1_70_v.wav", synth_voice(0.9, 999));
  FeatureCache cache_b = cache_for(p);
  EXPECT_EQ(predict_day(p, 60, params, cache_b), before_future);

  // perturbing a sample beyond the 56-day lookback (day 0 vs day 60) too
  write_wav(dir.str() + "/P1_0_c.wav", synth_cough(0.95, 1234));
  FeatureCache cache_c = cache_for(p);
  EXPECT_EQ(predict_day(p, 60, params, cache_c), before_future);

  // but perturbing an in-window sample (day 58) does change it
  write_wav(dir.str() + "/P1_58_v.wav", synth_voice(0.95, 4321));
  FeatureCache cache_d = cache_for(p);
  EXPECT_NE(predict_day(p, 60, params, cache_d), before_future);
}

TEST(PredictTrajectory, SecondSampleOnward) {
  TempDir dir("traj");
  Participant p = make_participant(dir, "P1", {0, 2, 4, 6, 8, 10, 12, 14, 16}, 4);
  FeatureCache cache = cache_for(p);
  ModelParams params = init_params(tiny_model(), 8);
  Trajectory t = predict_trajectory(p, params, cache);
  EXPECT_EQ(t.points.size(), 8u);  // 9 samples -> predictions from the 2nd
  EXPECT_TRUE(t.skipped_days.empty());
  for (std::size_t i = 1; i < t.points.size(); ++i)
    EXPECT_GT(t.points[i].day, t.points[i - 1].day);
  for (const auto& pt : t.points)
    EXPECT_EQ(pt.predicted_positive, pt.probability >= 0.5);
}

TEST(PredictTrajectory, TooFewSamples) {
  TempDir dir("traj");
  Participant p = make_participant(dir, "P1", {0}, 5);
  FeatureCache cache = cache_for(p);
  ModelParams params = init_params(tiny_model(), 9);
  try {
    predict_trajectory(p, params, cache);
    FAIL() << "expected TooFewSamples";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewSamples);
  }
}

TEST(PredictTrajectory, GapBeyondLookbackIsSkippedAndReported) {
  TempDir dir("traj");
  Participant p = make_participant(dir, "P1", {0, 60, 64}, 6);
  FeatureCache cache = cache_for(p);
  ModelParams params = init_params(tiny_model(), 10);
  Trajectory t = predict_trajectory(p, params, cache);
  ASSERT_EQ(t.skipped_days.size(), 1u);  // day 60 has no in-window history
  EXPECT_EQ(t.skipped_days[0], 60);
  ASSERT_EQ(t.points.size(), 1u);
  EXPECT_EQ(t.points[0].day, 64);
}

TEST(ExtractLatents, ShapeAndHistoryDeterminism) {
  TempDir dir("traj");
  Participant p1 = make_participant(dir, "P1", {0, 3}, 7);
  // identical clips and gaps, shifted 10 days later
  Participant p2 = p1;
  p2.id = "P2";
  p2.samples[0].day = 10;
  p2.samples[1].day = 13;

  ModelParams params = init_params(tiny_model(), 11);
  FeatureCache cache(tiny_features());
  for (const auto& s : p1.samples) cache.add_sample(s);
  cache.build(1);

  auto l1 = extract_latents(p1, params, cache);
  auto l2 = extract_latents(p2, params, cache);
  ASSERT_EQ(l1.size(), 1u);
  ASSERT_EQ(l2.size(), 1u);
  EXPECT_EQ(l1[0].second.size(), 4);
  // identical inputs with identical gaps give identical latents
  for (int i = 0; i < 4; ++i) EXPECT_EQ(l1[0].second(i), l2[0].second(i));
}

TEST(Evaluate, SingleClassTestSetRejected) {
  TempDir dir("evalsc");
  CohortSpec spec;
  spec.seed = 41;
  spec.per_archetype = {0, 0, 4, 0};  // healthy only
  spec.samples_min = 6;
  spec.samples_max = 6;
  spec.gap_violation_rate = 0.0;
  GeneratedCohort gen = generate_cohort(spec, dir.str());
  Cohort cohort = load_manifest(gen.manifest_path, false).cohort;

  ModelConfig mc = tiny_model();
  ModelParams seq = init_params(mc, 12);
  BaselineParams single = init_baseline_params(mc, ModelKind::baseline_single, 13);
  BaselineParams average = init_baseline_params(mc, ModelKind::baseline_average, 14);
  std::vector<std::string> ids;
  for (const auto& p : cohort.participants) ids.push_back(p.id);

  EvalInputs inputs{cohort, ids, seq, single, average, tiny_features(), 100, 1, 1};
  try {
    evaluate(inputs);
    FAIL() << "expected SingleClass";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::SingleClass);
  }
}

TEST(TrajectoryCsv, RoundTrip) {
  TempDir dir("trajcsv");
  Trajectory t;
  t.participant_id = "P9";
  t.points = {{1, 0.25, false, TestLabel::negative},
              {4, 0.75, true, TestLabel::positive},
              {9, 0.5, true, TestLabel::positive}};
  const std::string path = dir.str() + "/t.csv";
  write_trajectory_csv(path, t);
  Trajectory back = read_trajectory_csv(path);
  EXPECT_EQ(back.participant_id, "P9");
  ASSERT_EQ(back.points.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(back.points[i].day, t.points[i].day);
    EXPECT_NEAR(back.points[i].probability, t.points[i].probability, 1e-9);
    EXPECT_EQ(back.points[i].predicted_positive, t.points[i].predicted_positive);
    EXPECT_EQ(back.points[i].label, t.points[i].label);
  }
}
