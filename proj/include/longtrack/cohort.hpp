// SPDX-License-Identifier: Apache-2.0
#ifndef LONGTRACK_COHORT_HPP
#define LONGTRACK_COHORT_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "longtrack/audio.hpp"
#include "longtrack/common.hpp"
#include "longtrack/wav.hpp"

namespace longtrack {

enum class TestLabel : int { negative = 0, positive = 1 };

// The cohort spans 8 languages; English-dominant, mirroring the source data.
enum class Language : int { en = 0, de, es, fr, it, pt, ru, zh };
constexpr int kNumLanguages = 8;

enum class Gender : int { female = 0, male, other };
enum class AgeBand : int { a16_29 = 0, a30_39, a40_49, a50_59, a60_plus };

inline const char* to_string(TestLabel l) { return l == TestLabel::positive ? "positive" : "negative"; }

inline const char* to_string(Language l) {
  static constexpr const char* names[] = {"en", "de", "es", "fr", "it", "pt", "ru", "zh"};
  return names[static_cast<int>(l)];
}

inline const char* to_string(Gender g) {
  static constexpr const char* names[] = {"female", "male", "other"};
  return names[static_cast<int>(g)];
}

inline const char* to_string(AgeBand a) {
  static constexpr const char* names[] = {"16-29", "30-39", "40-49", "50-59", "60+"};
  return names[static_cast<int>(a)];
}

template <typename Enum, int N>
inline Enum parse_enum(const std::string& text, const char* what) {
  for (int i = 0; i < N; ++i)
    if (text == to_string(static_cast<Enum>(i))) return static_cast<Enum>(i);
  fail(ErrorKind::ManifestParse, std::string("bad ") + what + " value '" + text + "'");
}

inline TestLabel parse_label(const std::string& s) { return parse_enum<TestLabel, 2>(s, "label"); }
inline Language parse_language(const std::string& s) { return parse_enum<Language, 8>(s, "language"); }
inline Gender parse_gender(const std::string& s) { return parse_enum<Gender, 3>(s, "gender"); }
inline AgeBand parse_age_band(const std::string& s) { return parse_enum<AgeBand, 5>(s, "age_band"); }

// Optional training-time clip perturbation: gain plus white noise at a fixed
// SNR. Applied after trimming, before peak normalization.
struct PerturbSpec {
  double gain_db = 0.0;
  double noise_snr_db = std::numeric_limits<double>::infinity();
  std::uint64_t noise_seed = 0;

  bool operator==(const PerturbSpec&) const = default;
};

struct ModalityClip {
  std::string path;
  std::optional<PerturbSpec> perturb;
};

// One participant-day: the three modality recordings plus the self-reported
// test label and symptom count.
struct RecordingSample {
  std::string participant_id;
  int day = 0;
  ModalityClip breath, cough, voice;
  TestLabel label = TestLabel::negative;
  int symptom_count = 0;
  bool symptoms_reported = false;
};

struct Participant {
  std::string id;
  Language language = Language::en;
  Gender gender = Gender::female;
  AgeBand age_band = AgeBand::a30_39;
  std::vector<RecordingSample> samples;  // strictly increasing in day

  bool eligible() const { return samples.size() >= 5; }

  bool ever_positive() const {
    for (const auto& s : samples)
      if (s.label == TestLabel::positive) return true;
    return false;
  }
};

struct Cohort {
  std::vector<Participant> participants;

  const Participant* find(const std::string& id) const {
    for (const auto& p : participants)
      if (p.id == id) return &p;
    return nullptr;
  }
};

struct DroppedRow {
  std::size_t line;
  std::string participant_id;
  int day = 0;
  std::string reason;
};

struct ManifestLoad {
  Cohort cohort;
  std::vector<DroppedRow> dropped;
};

namespace cohort_detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline int parse_int(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    int v = std::stoi(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    fail(ErrorKind::ManifestParse, std::string("bad ") + what + " value '" + s + "'");
  }
}

}  // namespace cohort_detail

constexpr const char* kManifestHeader =
    "participant_id,day,breath_path,cough_path,voice_path,label,symptom_count,language,gender,age_band";

// Loads the cohort manifest. Rows whose recordings fail the quality gate are
// dropped and reported; audio paths are resolved relative to the manifest.
// Duplicate (participant, day) rows are rejected: samples must be strictly
// increasing in day and same-day label reconciliation is out of scope.
inline ManifestLoad load_manifest(const std::string& manifest_path, bool check_quality = true) {
  namespace fs = std::filesystem;
  std::ifstream in(manifest_path);
  if (!in) fail(ErrorKind::IoFailure, "cannot open manifest " + manifest_path);
  const fs::path base = fs::path(manifest_path).parent_path();

  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ManifestParse, "empty manifest");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kManifestHeader)
    fail(ErrorKind::ManifestParse, "unexpected manifest header: " + line);

  ManifestLoad out;
  std::map<std::string, Participant> by_id;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = cohort_detail::split_csv_line(line);
    if (fields.size() != 10)
      fail(ErrorKind::ManifestParse,
           "line " + std::to_string(line_no) + ": expected 10 fields, got " +
               std::to_string(fields.size()));

    RecordingSample sample;
    sample.participant_id = fields[0];
    sample.day = cohort_detail::parse_int(fields[1], "day");
    if (sample.day < 0)
      fail(ErrorKind::ManifestParse, "line " + std::to_string(line_no) + ": negative day");
    auto resolve = [&](const std::string& p) {
      fs::path q(p);
      return q.is_absolute() ? q.string() : (base / q).string();
    };
    sample.breath.path = resolve(fields[2]);
    sample.cough.path = resolve(fields[3]);
    sample.voice.path = resolve(fields[4]);
    sample.label = parse_label(fields[5]);
    sample.symptom_count = cohort_detail::parse_int(fields[6], "symptom_count");
    if (sample.symptom_count < 0)
      fail(ErrorKind::ManifestParse, "line " + std::to_string(line_no) + ": negative symptom_count");
    sample.symptoms_reported = sample.symptom_count > 0;
    const Language language = parse_language(fields[7]);
    const Gender gender = parse_gender(fields[8]);
    const AgeBand age_band = parse_age_band(fields[9]);

    if (check_quality) {
      std::string reason;
      const std::array<std::pair<const ModalityClip*, const char*>, 3> modalities = {
          {{&sample.breath, "breath"}, {&sample.cough, "cough"}, {&sample.voice, "voice"}}};
      for (const auto& [clip, name] : modalities) {
        if (!fs::exists(clip->path))
          fail(ErrorKind::MissingAudio, "line " + std::to_string(line_no) + ": " + clip->path);
        AudioClip mono = to_mono(load_wav(clip->path));
        mono = resample(mono, 16000);
        const QualityVerdict verdict = quality_check(mono);
        if (verdict != QualityVerdict::ok) {
          reason = std::string(name) + ": " + quality_verdict_name(verdict);
          break;
        }
      }
      if (!reason.empty()) {
        out.dropped.push_back({line_no, sample.participant_id, sample.day, reason});
        continue;
      }
    }

    auto [it, inserted] = by_id.try_emplace(sample.participant_id);
    Participant& p = it->second;
    if (inserted) {
      p.id = sample.participant_id;
      p.language = language;
      p.gender = gender;
      p.age_band = age_band;
    }
    for (const auto& existing : p.samples)
      if (existing.day == sample.day)
        fail(ErrorKind::ManifestParse,
             "line " + std::to_string(line_no) + ": duplicate day " + std::to_string(sample.day) +
                 " for participant " + sample.participant_id);
    p.samples.push_back(std::move(sample));
  }

  for (auto& [id, p] : by_id) {
    std::sort(p.samples.begin(), p.samples.end(),
              [](const RecordingSample& a, const RecordingSample& b) { return a.day < b.day; });
    out.cohort.participants.push_back(std::move(p));
  }
  return out;
}

inline void write_drop_log(const std::string& path, const std::vector<DroppedRow>& dropped) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path);
  for (const auto& d : dropped)
    out << "line " << d.line << " participant " << d.participant_id << " day " << d.day << ": "
        << d.reason << "\n";
}

enum class AugTag { none, time_inverse, perturb, oversample };

inline const char* to_string(AugTag t) {
  switch (t) {
    case AugTag::none: return "none";
    case AugTag::time_inverse: return "time_inverse";
    case AugTag::perturb: return "perturb";
    case AugTag::oversample: return "oversample";
  }
  return "unknown";
}

// A run of exactly five recordings from one participant with every adjacent
// day gap in [1, max_gap]; the training unit.
struct SequenceWindow {
  std::string participant_id;
  Language language = Language::en;
  std::vector<RecordingSample> samples;  // size kWindowLen, day order
  AugTag tag = AugTag::none;

  static constexpr int kWindowLen = 5;

  std::vector<int> gaps() const {
    std::vector<int> g;
    for (std::size_t i = 1; i < samples.size(); ++i)
      g.push_back(samples[i].day - samples[i - 1].day);
    return g;
  }

  // majority of the five per-sample labels
  TestLabel dominant_label() const {
    int positives = 0;
    for (const auto& s : samples)
      if (s.label == TestLabel::positive) ++positives;
    return positives * 2 > static_cast<int>(samples.size()) ? TestLabel::positive
                                                            : TestLabel::negative;
  }
};

// Sliding windows over a participant's day-ordered samples; any window with a
// gap above max_gap is discarded.
inline std::vector<SequenceWindow> generate_windows(const Participant& participant, int len = 5,
                                                    int max_gap = 14, int stride = 1) {
  LT_REQUIRE(len >= 2, "generate_windows: len < 2");
  LT_REQUIRE(stride >= 1, "generate_windows: stride < 1");
  std::vector<SequenceWindow> out;
  if (static_cast<int>(participant.samples.size()) < len) return out;
  for (std::size_t start = 0; start + len <= participant.samples.size();
       start += static_cast<std::size_t>(stride)) {
    bool ok = true;
    for (std::size_t i = start + 1; i < start + len; ++i) {
      const int gap = participant.samples[i].day - participant.samples[i - 1].day;
      if (gap < 1 || gap > max_gap) {
        ok = false;
        break;
      }
    }
    if (!ok) continue;
    SequenceWindow w;
    w.participant_id = participant.id;
    w.language = participant.language;
    w.samples.assign(participant.samples.begin() + static_cast<std::ptrdiff_t>(start),
                     participant.samples.begin() + static_cast<std::ptrdiff_t>(start + len));
    out.push_back(std::move(w));
  }
  return out;
}

// Reverses the recordings and their labels in time; day indices are remapped
// (keeping the first day) so the gap sequence reverses. Involutive up to tag.
inline SequenceWindow time_inverse_augment(const SequenceWindow& window) {
  SequenceWindow out = window;
  std::reverse(out.samples.begin(), out.samples.end());
  const int first_day = window.samples.front().day;
  std::vector<int> gaps = window.gaps();
  std::reverse(gaps.begin(), gaps.end());
  int day = first_day;
  out.samples[0].day = day;
  for (std::size_t i = 1; i < out.samples.size(); ++i) {
    day += gaps[i - 1];
    out.samples[i].day = day;
  }
  out.tag = AugTag::time_inverse;
  return out;
}

// Assigns each clip a gain draw and a fresh noise stream at the given SNR.
// Labels are untouched.
inline SequenceWindow perturb_augment(const SequenceWindow& window, double gain_db_min,
                                      double gain_db_max, double noise_snr_db, Rng& rng) {
  SequenceWindow out = window;
  for (auto& s : out.samples) {
    for (ModalityClip* clip : {&s.breath, &s.cough, &s.voice}) {
      PerturbSpec spec;
      spec.gain_db = rng.uniform(gain_db_min, gain_db_max);
      spec.noise_snr_db = noise_snr_db;
      spec.noise_seed = rng.next_u64();
      clip->perturb = spec;
    }
  }
  if (out.tag == AugTag::none) out.tag = AugTag::perturb;
  return out;
}

// Replicates minority-dominant windows (majority label over the five samples)
// with fresh perturbation draws until the class counts are within 5%.
inline std::vector<SequenceWindow> oversample_balance(const std::vector<SequenceWindow>& windows,
                                                      std::uint64_t seed,
                                                      double gain_db_min = -3.0,
                                                      double gain_db_max = 3.0,
                                                      double noise_snr_db = 25.0) {
  std::vector<SequenceWindow> out = windows;
  long n_pos = 0, n_neg = 0;
  std::vector<std::size_t> pos_idx, neg_idx;
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (windows[i].dominant_label() == TestLabel::positive) {
      ++n_pos;
      pos_idx.push_back(i);
    } else {
      ++n_neg;
      neg_idx.push_back(i);
    }
  }
  if (pos_idx.empty() || neg_idx.empty()) return out;  // nothing to balance toward

  Rng rng(mix_seed(seed, 0xba1a));
  std::size_t cursor = 0;
  while (std::llabs(n_pos - n_neg) * 20 > n_pos + n_neg) {
    const bool add_pos = n_pos < n_neg;
    const auto& source = add_pos ? pos_idx : neg_idx;
    const SequenceWindow& base = windows[source[cursor % source.size()]];
    ++cursor;
    SequenceWindow replica = perturb_augment(base, gain_db_min, gain_db_max, noise_snr_db, rng);
    replica.tag = AugTag::oversample;
    out.push_back(std::move(replica));
    (add_pos ? n_pos : n_neg) += 1;
  }
  return out;
}

struct DatasetSplit {
  std::vector<std::string> train, validation, test;

  bool contains(const std::vector<std::string>& part, const std::string& id) const {
    return std::find(part.begin(), part.end(), id) != part.end();
  }
};

namespace cohort_detail {

// Largest-remainder apportionment with every partition guaranteed one member.
inline std::array<std::size_t, 3> apportion(std::size_t n, const std::array<double, 3>& ratios) {
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> want{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    want[i] = n * ratios[i];
    counts[i] = static_cast<std::size_t>(want[i]);
    assigned += counts[i];
  }
  while (assigned < n) {
    int best = 0;
    double best_frac = -1.0;
    for (int i = 0; i < 3; ++i) {
      const double frac = want[i] - static_cast<double>(counts[i]);
      if (frac > best_frac) {
        best_frac = frac;
        best = i;
      }
    }
    ++counts[best];
    ++assigned;
  }
  for (int i = 0; i < 3; ++i) {
    while (counts[i] == 0) {
      int donor = 0;
      for (int j = 1; j < 3; ++j)
        if (counts[j] > counts[donor]) donor = j;
      LT_REQUIRE(counts[donor] > 1, "apportion: cannot give every partition a member");
      --counts[donor];
      ++counts[i];
    }
  }
  return counts;
}

}  // namespace cohort_detail

// Participant-level split stratified by ever-positive status, dealing the
// (language, gender)-sorted members proportionally so secondary keys stay
// balanced across partitions. Deterministic under seed.
inline DatasetSplit split_participants(const Cohort& cohort,
                                       std::array<double, 3> ratios = {0.70, 0.10, 0.20},
                                       std::uint64_t seed = 1) {
  LT_REQUIRE(std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) < 1e-9,
             "split_participants: ratios must sum to 1");
  std::vector<const Participant*> eligible;
  for (const auto& p : cohort.participants)
    if (p.eligible()) eligible.push_back(&p);
  if (eligible.empty()) fail(ErrorKind::InsufficientParticipants, "no eligible participants");

  DatasetSplit split;
  for (int cls = 0; cls < 2; ++cls) {
    std::vector<const Participant*> members;
    for (const Participant* p : eligible)
      if (p->ever_positive() == (cls == 1)) members.push_back(p);
    if (members.empty()) continue;
    if (members.size() < 3)
      fail(ErrorKind::InsufficientParticipants,
           std::string("class ") + (cls ? "positive" : "negative") +
               " cannot fill train/validation/test");

    // shuffle, then order by secondary keys with the shuffle as tiebreak
    Rng rng(mix_seed(seed, 0x5117 + static_cast<std::uint64_t>(cls)));
    rng.shuffle(members);
    std::stable_sort(members.begin(), members.end(), [](const Participant* a, const Participant* b) {
      return std::pair(static_cast<int>(a->language), static_cast<int>(a->gender)) <
             std::pair(static_cast<int>(b->language), static_cast<int>(b->gender));
    });

    const auto counts = cohort_detail::apportion(members.size(), ratios);
    std::array<std::size_t, 3> assigned{};
    std::array<double, 3> acc{};
    for (const Participant* p : members) {
      int pick = -1;
      double best = -std::numeric_limits<double>::infinity();
      for (int i = 0; i < 3; ++i) {
        acc[i] += ratios[i];
        if (assigned[i] < counts[i] && acc[i] > best) {
          best = acc[i];
          pick = i;
        }
      }
      LT_REQUIRE(pick >= 0, "split_participants: apportionment exhausted");
      acc[pick] -= 1.0;
      ++assigned[pick];
      (pick == 0 ? split.train : pick == 1 ? split.validation : split.test).push_back(p->id);
    }
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

inline void write_split_csv(const std::string& path, const DatasetSplit& split) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path);
  out << "participant_id,partition\n";
  for (const auto& id : split.train) out << id << ",train\n";
  for (const auto& id : split.validation) out << id << ",validation\n";
  for (const auto& id : split.test) out << id << ",test\n";
}

inline DatasetSplit read_split_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoFailure, "cannot open split file " + path);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::ManifestParse, "empty split file");
  DatasetSplit split;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = cohort_detail::split_csv_line(line);
    if (fields.size() != 2) fail(ErrorKind::ManifestParse, "bad split row: " + line);
    if (fields[1] == "train")
      split.train.push_back(fields[0]);
    else if (fields[1] == "validation")
      split.validation.push_back(fields[0]);
    else if (fields[1] == "test")
      split.test.push_back(fields[0]);
    else
      fail(ErrorKind::ManifestParse, "bad partition name: " + fields[1]);
  }
  return split;
}

}  // namespace longtrack

#endif  // LONGTRACK_COHORT_HPP
