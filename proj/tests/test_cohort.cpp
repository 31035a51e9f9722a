// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <fstream>
#include <set>

#include "longtrack/cohort.hpp"
#include "longtrack/features.hpp"
#include "longtrack/wav.hpp"
#include "testsupport.hpp"

using namespace longtrack;
using testsupport::TempDir;

namespace {

// a 0.8 s tone that passes the quality gate
void write_good_wav(const std::string& path, double freq = 440.0) {
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples = testsupport::make_sine(freq, 0.5, 0.8, 16000);
  write_wav(path, clip);
}

std::string write_manifest(const TempDir& dir, const std::vector<std::string>& rows) {
  const std::string path = dir.str() + "/manifest.csv";
  std::ofstream out(path);
  out << kManifestHeader << "\n";
  for (const auto& r : rows) out << r << "\n";
  return path;
}

SequenceWindow window_with_days_labels(const std::vector<int>& days,
                                       const std::vector<TestLabel>& labels) {
  SequenceWindow w;
  w.participant_id = "P1";
  w.language = Language::en;
  for (std::size_t i = 0; i < days.size(); ++i) {
    RecordingSample s;
    s.participant_id = "P1";
    s.day = days[i];
    s.label = labels[i];
    s.breath.path = "b" + std::to_string(i) + ".wav";
    s.cough.path = "c" + std::to_string(i) + ".wav";
    s.voice.path = "v" + std::to_string(i) + ".wav";
    w.samples.push_back(s);
  }
  return w;
}

Participant participant_with_days(const std::vector<int>& days) {
  Participant p;
  p.id = "P1";
  for (int d : days) {
    RecordingSample s;
    s.participant_id = "P1";
    s.day = d;
    s.label = TestLabel::negative;
    p.samples.push_back(s);
  }
  return p;
}

}  // namespace

TEST(LoadManifest, SortsSamplesByDay) {
  TempDir dir("manifest");
  write_good_wav(dir.str() + "/b.wav");
  write_good_wav(dir.str() + "/c.wav", 880.0);
  write_good_wav(dir.str() + "/v.wav", 220.0);
  const std::string manifest = write_manifest(
      dir, {"P1,3,b.wav,c.wav,v.wav,positive,2,en,female,30-39",
            "P1,1,b.wav,c.wav,v.wav,negative,0,en,female,30-39"});
  ManifestLoad load = load_manifest(manifest);
  ASSERT_EQ(load.cohort.participants.size(), 1u);
  const auto& samples = load.cohort.participants[0].samples;
  ASSERT_EQ(samples.size(), 2u);
  EXPECT_EQ(samples[0].day, 1);
  EXPECT_EQ(samples[1].day, 3);
  EXPECT_EQ(samples[0].label, TestLabel::negative);
  EXPECT_EQ(samples[1].label, TestLabel::positive);
}

TEST(LoadManifest, BadLabelRejected) {
  TempDir dir("manifest");
  write_good_wav(dir.str() + "/b.wav");
  const std::string manifest =
      write_manifest(dir, {"P1,1,b.wav,b.wav,b.wav,maybe,0,en,female,30-39"});
  try {
    load_manifest(manifest);
    FAIL() << "expected ManifestParse";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ManifestParse);
  }
}

TEST(LoadManifest, DuplicateDayRejected) {
  TempDir dir("manifest");
  write_good_wav(dir.str() + "/b.wav");
  const std::string manifest =
      write_manifest(dir, {"P1,1,b.wav,b.wav,b.wav,negative,0,en,female,30-39",
                           "P1,1,b.wav,b.wav,b.wav,positive,0,en,female,30-39"});
  try {
    load_manifest(manifest);
    FAIL() << "expected ManifestParse";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ManifestParse);
  }
}

TEST(LoadManifest, MissingAudioRejected) {
  TempDir dir("manifest");
  const std::string manifest =
      write_manifest(dir, {"P1,1,gone.wav,gone.wav,gone.wav,negative,0,en,female,30-39"});
  try {
    load_manifest(manifest);
    FAIL() << "expected MissingAudio";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingAudio);
  }
}

TEST(LoadManifest, QualityFailureDropsRow) {
  TempDir dir("manifest");
  write_good_wav(dir.str() + "/good.wav");
  AudioClip brief;
  brief.sample_rate = 16000;
  brief.samples = testsupport::make_sine(440.0, 0.5, 0.2, 16000);
  write_wav(dir.str() + "/short.wav", brief);
  const std::string manifest = write_manifest(
      dir, {"P1,1,good.wav,good.wav,good.wav,negative,0,en,female,30-39",
            "P1,2,good.wav,short.wav,good.wav,negative,0,en,female,30-39"});
  ManifestLoad load = load_manifest(manifest);
  ASSERT_EQ(load.cohort.participants.size(), 1u);
  EXPECT_EQ(load.cohort.participants[0].samples.size(), 1u);
  ASSERT_EQ(load.dropped.size(), 1u);
  EXPECT_EQ(load.dropped[0].day, 2);
  EXPECT_NE(load.dropped[0].reason.find("too_short"), std::string::npos);
}

TEST(GenerateWindows, SingleWindowWithGaps) {
  Participant p = participant_with_days({0, 3, 6, 9, 12});
  auto windows = generate_windows(p);
  ASSERT_EQ(windows.size(), 1u);
  EXPECT_EQ(windows[0].gaps(), (std::vector<int>{3, 3, 3, 3}));
}

TEST(GenerateWindows, ExcessiveGapDiscards) {
  Participant p = participant_with_days({0, 3, 6, 21, 24});
  EXPECT_TRUE(generate_windows(p).empty());  // gap 15 > 14
}

TEST(GenerateWindows, StrideOneCount) {
  Participant p = participant_with_days({0, 1, 2, 3, 4, 5, 6, 7, 8});
  EXPECT_EQ(generate_windows(p).size(), 5u);  // n - len + 1
}

TEST(GenerateWindows, EveryWindowSatisfiesInvariants) {
  Rng rng(17);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<int> days{0};
    const int n = 5 + static_cast<int>(rng.bounded(8));
    for (int i = 1; i < n; ++i) days.push_back(days.back() + 1 + static_cast<int>(rng.bounded(20)));
    Participant p = participant_with_days(days);
    for (const auto& w : generate_windows(p)) {
      EXPECT_EQ(w.samples.size(), 5u);
      for (int g : w.gaps()) {
        EXPECT_GE(g, 1);
        EXPECT_LE(g, 14);
      }
    }
  }
}

TEST(TimeInverse, ReversesLabelsAndGaps) {
  using L = TestLabel;
  SequenceWindow w = window_with_days_labels(
      {0, 1, 3, 6, 10}, {L::positive, L::positive, L::negative, L::negative, L::negative});
  SequenceWindow inv = time_inverse_augment(w);
  EXPECT_EQ(inv.tag, AugTag::time_inverse);
  std::vector<TestLabel> labels;
  for (const auto& s : inv.samples) labels.push_back(s.label);
  EXPECT_EQ(labels, (std::vector<TestLabel>{L::negative, L::negative, L::negative, L::positive,
                                            L::positive}));
  EXPECT_EQ(inv.gaps(), (std::vector<int>{4, 3, 2, 1}));
}

TEST(TimeInverse, Involution) {
  using L = TestLabel;
  SequenceWindow w = window_with_days_labels(
      {2, 5, 6, 13, 14}, {L::negative, L::positive, L::positive, L::negative, L::positive});
  SequenceWindow twice = time_inverse_augment(time_inverse_augment(w));
  ASSERT_EQ(twice.samples.size(), w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    EXPECT_EQ(twice.samples[i].day, w.samples[i].day);
    EXPECT_EQ(twice.samples[i].label, w.samples[i].label);
    EXPECT_EQ(twice.samples[i].voice.path, w.samples[i].voice.path);
  }
}

TEST(PerturbAugment, AssignsSpecsAndKeepsLabels) {
  using L = TestLabel;
  SequenceWindow w = window_with_days_labels(
      {0, 1, 2, 3, 4}, {L::positive, L::negative, L::positive, L::negative, L::positive});
  Rng rng(23);
  SequenceWindow out = perturb_augment(w, -3.0, 3.0, 25.0, rng);
  EXPECT_EQ(out.tag, AugTag::perturb);
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    EXPECT_EQ(out.samples[i].label, w.samples[i].label);
    for (const ModalityClip* clip :
         {&out.samples[i].breath, &out.samples[i].cough, &out.samples[i].voice}) {
      ASSERT_TRUE(clip->perturb.has_value());
      EXPECT_GE(clip->perturb->gain_db, -3.0);
      EXPECT_LE(clip->perturb->gain_db, 3.0);
      EXPECT_DOUBLE_EQ(clip->perturb->noise_snr_db, 25.0);
    }
  }
}

TEST(PerturbFeatures, IdentityParametersLeaveClipUnchanged) {
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples = testsupport::make_sine(500.0, 0.5, 0.6, 16000);
  PerturbSpec spec;  // 0 dB, infinite SNR
  AudioClip out = apply_perturb(clip, spec);
  EXPECT_EQ(out.samples, clip.samples);
}

TEST(PerturbFeatures, GainNeutralizedByNormalization) {
  FeatureParams params;
  params.patch_frames = 16;
  params.mel.n_mels = 12;
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples = testsupport::make_sine(500.0, 0.4, 0.6, 16000);
  const AudioClip pre = trim_silence(clip);

  PerturbSpec gain_only;
  gain_only.gain_db = 6.0;
  PatchSet gained = clip_to_patches(pre, gain_only, params);
  PatchSet plain = clip_to_patches(pre, std::nullopt, params);
  ASSERT_EQ(gained.patches.size(), plain.patches.size());
  for (std::size_t i = 0; i < plain.patches.size(); ++i)
    EXPECT_TRUE(gained.patches[i].isApprox(plain.patches[i], 1e-9));
}

TEST(PerturbFeatures, ToneBandEnergyPreservedAtSnr20) {
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.samples = testsupport::make_sine(1000.0, 0.5, 1.0, 16000);
  PerturbSpec spec;
  spec.noise_snr_db = 20.0;
  spec.noise_seed = 99;
  AudioClip noisy = apply_perturb(clip, spec);

  // tone-band energy via DFT bins around 1 kHz (test-side oracle)
  auto band_energy = [](const std::vector<double>& x) {
    double e = 0.0;
    const std::size_t k0 = 1000 * x.size() / 16000;
    for (std::size_t k = k0 - 2; k <= k0 + 2; ++k) e += std::norm(testsupport::dft_bin(x, k));
    return e;
  };
  const double before = band_energy(clip.samples);
  const double after = band_energy(noisy.samples);
  EXPECT_NEAR(10.0 * std::log10(after / before), 0.0, 0.5);
}

TEST(OversampleBalance, AlreadyBalancedUnchanged) {
  using L = TestLabel;
  std::vector<SequenceWindow> windows;
  for (int i = 0; i < 4; ++i) {
    const L maj = i % 2 ? L::positive : L::negative;
    windows.push_back(window_with_days_labels({0, 1, 2, 3, 4}, {maj, maj, maj, maj, maj}));
  }
  auto out = oversample_balance(windows, 1);
  EXPECT_EQ(out.size(), windows.size());
}

TEST(OversampleBalance, MinorityReplicated) {
  using L = TestLabel;
  std::vector<SequenceWindow> windows;
  for (int i = 0; i < 10; ++i)
    windows.push_back(window_with_days_labels(
        {0, 1, 2, 3, 4}, {L::negative, L::negative, L::negative, L::negative, L::negative}));
  for (int i = 0; i < 2; ++i)
    windows.push_back(window_with_days_labels(
        {0, 1, 2, 3, 4}, {L::positive, L::positive, L::positive, L::positive, L::positive}));
  auto out = oversample_balance(windows, 1);
  long pos = 0, neg = 0;
  for (const auto& w : out) (w.dominant_label() == L::positive ? pos : neg) += 1;
  EXPECT_GE(out.size() - windows.size(), 8u);
  EXPECT_LE(std::llabs(pos - neg) * 20, pos + neg);
  for (std::size_t i = windows.size(); i < out.size(); ++i)
    EXPECT_EQ(out[i].tag, AugTag::oversample);
}

TEST(OversampleBalance, DeterministicUnderSeed) {
  using L = TestLabel;
  std::vector<SequenceWindow> windows;
  for (int i = 0; i < 7; ++i)
    windows.push_back(window_with_days_labels(
        {0, 1, 2, 3, 4}, {L::negative, L::negative, L::negative, L::negative, L::negative}));
  windows.push_back(window_with_days_labels(
      {0, 1, 2, 3, 4}, {L::positive, L::positive, L::positive, L::positive, L::positive}));
  auto a = oversample_balance(windows, 77);
  auto b = oversample_balance(windows, 77);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].tag, b[i].tag);
    if (a[i].samples[0].voice.perturb) {
      ASSERT_TRUE(b[i].samples[0].voice.perturb.has_value());
      EXPECT_DOUBLE_EQ(a[i].samples[0].voice.perturb->gain_db,
                       b[i].samples[0].voice.perturb->gain_db);
      EXPECT_EQ(a[i].samples[0].voice.perturb->noise_seed,
                b[i].samples[0].voice.perturb->noise_seed);
    }
  }
}

namespace {

Cohort make_split_cohort(int n_pos, int n_neg) {
  Cohort cohort;
  Rng rng(31);
  for (int i = 0; i < n_pos + n_neg; ++i) {
    Participant p;
    p.id = "P" + std::to_string(1000 + i);
    p.language = static_cast<Language>(rng.bounded(8));
    p.gender = static_cast<Gender>(rng.bounded(2));
    const bool positive = i < n_pos;
    for (int d = 0; d < 6; ++d) {
      RecordingSample s;
      s.participant_id = p.id;
      s.day = d * 2;
      s.label = positive && d >= 2 ? TestLabel::positive : TestLabel::negative;
      p.samples.push_back(s);
    }
    cohort.participants.push_back(std::move(p));
  }
  return cohort;
}

}  // namespace

TEST(SplitParticipants, ExactCountsPerClass) {
  Cohort cohort = make_split_cohort(100, 100);
  DatasetSplit split = split_participants(cohort, {0.70, 0.10, 0.20}, 5);
  auto count_class = [&](const std::vector<std::string>& ids, bool positive) {
    int n = 0;
    for (const auto& id : ids)
      if (cohort.find(id)->ever_positive() == positive) ++n;
    return n;
  };
  EXPECT_EQ(count_class(split.train, true), 70);
  EXPECT_EQ(count_class(split.train, false), 70);
  EXPECT_EQ(count_class(split.validation, true), 10);
  EXPECT_EQ(count_class(split.validation, false), 10);
  EXPECT_EQ(count_class(split.test, true), 20);
  EXPECT_EQ(count_class(split.test, false), 20);
}

TEST(SplitParticipants, DeterministicAndDisjoint) {
  Cohort cohort = make_split_cohort(20, 25);
  DatasetSplit a = split_participants(cohort, {0.70, 0.10, 0.20}, 9);
  DatasetSplit b = split_participants(cohort, {0.70, 0.10, 0.20}, 9);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
  EXPECT_EQ(a.test, b.test);

  std::set<std::string> seen;
  for (const auto* part : {&a.train, &a.validation, &a.test})
    for (const auto& id : *part) EXPECT_TRUE(seen.insert(id).second) << "duplicate " << id;
  EXPECT_EQ(seen.size(), cohort.participants.size());
}

TEST(SplitParticipants, TooFewParticipants) {
  Cohort cohort = make_split_cohort(1, 1);
  try {
    split_participants(cohort, {0.70, 0.10, 0.20}, 1);
    FAIL() << "expected InsufficientParticipants";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientParticipants);
  }
}
