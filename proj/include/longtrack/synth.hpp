// SPDX-License-Identifier: Apache-2.0
//
// Deterministic synthetic longitudinal cohort generator. A latent severity
// trajectory s(t) in [0, 1] drives the labels, symptom counts, and acoustics
// of each participant-day. Voice clips are harmonic stacks whose jitter and
// noise grow with severity (less separable harmonics when sick); cough and
// breath clips are burst/cycle noise with severity-dependent spectral tilt.
// Per-participant acoustic offset and gain leave single-day prediction
// under-determined, so longitudinal context carries real signal.
#ifndef LONGTRACK_SYNTH_HPP
#define LONGTRACK_SYNTH_HPP

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "longtrack/audio.hpp"
#include "longtrack/cohort.hpp"
#include "longtrack/common.hpp"
#include "longtrack/wav.hpp"

namespace longtrack {

enum class Archetype : int { recovering = 0, persistent_positive, healthy, late_onset };
constexpr int kNumArchetypes = 4;

inline const char* to_string(Archetype a) {
  static constexpr const char* names[] = {"recovering", "persistent_positive", "healthy",
                                          "late_onset"};
  return names[static_cast<int>(a)];
}

// Piecewise-linear severity: baseline, rise to peak, hold, decay to floor.
struct SeverityTrajectory {
  Archetype archetype = Archetype::healthy;
  double baseline = 0.08;
  double onset_day = 0.0;
  double rise_days = 5.0;
  double peak = 0.85;
  double hold_days = 3.0;
  double decay_days = 12.0;
  double floor = 0.05;

  double operator()(double t) const {
    if (archetype == Archetype::healthy) return baseline;
    if (t < onset_day) return baseline;
    if (t < onset_day + rise_days)
      return baseline + (peak - baseline) * (t - onset_day) / rise_days;
    if (t < onset_day + rise_days + hold_days) return peak;
    const double into_decay = t - onset_day - rise_days - hold_days;
    if (into_decay < decay_days) return peak - (peak - floor) * into_decay / decay_days;
    return floor;
  }
};

struct CohortSpec {
  std::uint64_t seed = 7;
  std::array<int, kNumArchetypes> per_archetype = {30, 30, 30, 30};
  int samples_min = 8;
  int samples_max = 12;
  int sample_rate = 16000;
  double gap_violation_rate = 0.05;  // occasional gap > 14 days, to exercise filtering

  // Per-participant acoustic mapping a(t) = offset + gain * s(t + lead).
  // Wide offsets with modest gains leave single-day prediction
  // under-determined across participants while each participant's own
  // dynamics stay informative; a nonzero lead makes the acoustics recover
  // before the self-reported labels do.
  double acoustic_offset_min = 0.0;
  double acoustic_offset_max = 0.55;
  double acoustic_gain_min = 0.28;
  double acoustic_gain_max = 0.50;
  int acoustic_lead_max_days = 3;

  // en-dominant language mix over the 8 codes
  std::array<double, kNumLanguages> language_weights = {0.54, 0.10, 0.08, 0.07,
                                                        0.07, 0.06, 0.05, 0.03};

  int total_participants() const {
    int n = 0;
    for (int c : per_archetype) n += c;
    return n;
  }
};

namespace synth_detail {

// One-pole lowpass; higher a = duller output.
inline void lowpass(std::vector<double>& x, double a) {
  double y = 0.0;
  for (double& v : x) {
    y = a * y + (1.0 - a) * v;
    v = y;
  }
}

inline void fade_edges(std::vector<double>& x, int fade_len) {
  const int n = static_cast<int>(x.size());
  fade_len = std::min(fade_len, n / 2);
  for (int i = 0; i < fade_len; ++i) {
    const double w = 0.5 - 0.5 * std::cos(M_PI * i / fade_len);
    x[static_cast<std::size_t>(i)] *= w;
    x[static_cast<std::size_t>(n - 1 - i)] *= w;
  }
}

inline void scale_peak(std::vector<double>& x, double target) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  if (peak <= 0.0) return;
  const double g = target / peak;
  for (double& v : x) v *= g;
}

}  // namespace synth_detail

// 2 s harmonic stack (f0 in 120-220 Hz from the seed's high bits, 8
// harmonics). Frequency jitter and broadband noise scale with s; at s = 0 the
// harmonics are clean.
inline AudioClip synth_voice(double s, std::uint64_t seed, int rate = 16000) {
  LT_REQUIRE(s >= 0.0 && s <= 1.0, "synth_voice: s outside [0,1]");
  Rng identity(mix_seed(seed >> 32, 0x701c));  // participant-stable traits
  Rng rng(mix_seed(seed, 0x70ce));
  const double f0 = 120.0 + 100.0 * identity.uniform();
  const int n = 2 * rate;
  constexpr int kHarmonics = 8;

  std::vector<double> x(static_cast<std::size_t>(n), 0.0);
  std::array<double, kHarmonics> phase{};
  for (int k = 0; k < kHarmonics; ++k) phase[static_cast<std::size_t>(k)] = 2.0 * M_PI * rng.uniform();

  const double jitter_sigma = 3e-3 * s;
  const double noise_amp = 0.012 + 0.5 * s;
  double deviation = 0.0;
  for (int i = 0; i < n; ++i) {
    deviation = 0.999 * deviation + jitter_sigma * rng.gauss();
    const double f_inst = f0 * (1.0 + deviation);
    double v = 0.0;
    for (int k = 0; k < kHarmonics; ++k) {
      phase[static_cast<std::size_t>(k)] += 2.0 * M_PI * (k + 1) * f_inst / rate;
      v += std::sin(phase[static_cast<std::size_t>(k)]) / (k + 1);
    }
    x[static_cast<std::size_t>(i)] = v + noise_amp * rng.gauss();
  }
  synth_detail::fade_edges(x, rate / 20);
  synth_detail::scale_peak(x, 0.9);
  return AudioClip{std::move(x), rate};
}

// Three noise-burst transients; burst duration and lowpass tilt grow with s.
inline AudioClip synth_cough(double s, std::uint64_t seed, int rate = 16000) {
  LT_REQUIRE(s >= 0.0 && s <= 1.0, "synth_cough: s outside [0,1]");
  Rng identity(mix_seed(seed >> 32, 0xc0f));
  Rng rng(mix_seed(seed, 0xc02e));
  const double duration = 1.15;
  const int n = static_cast<int>(duration * rate);
  std::vector<double> x(static_cast<std::size_t>(n), 0.0);

  const double base_burst = 0.085 + 0.02 * identity.uniform();
  const double burst_len_s = base_burst * (1.0 + 0.6 * s);
  const double starts[3] = {0.06, 0.43, 0.80};
  for (int b = 0; b < 3; ++b) {
    const int start = static_cast<int>(starts[b] * rate);
    const int len = static_cast<int>(burst_len_s * rate);
    const double tau = burst_len_s / 3.0;
    const double amp = 0.8 + 0.2 * rng.uniform();
    for (int i = 0; i < len && start + i < n; ++i) {
      const double t = static_cast<double>(i) / rate;
      x[static_cast<std::size_t>(start + i)] += amp * std::exp(-t / tau) * rng.gauss();
    }
  }
  synth_detail::lowpass(x, 0.12 + 0.55 * s);
  synth_detail::fade_edges(x, rate / 100);
  synth_detail::scale_peak(x, 0.9);
  return AudioClip{std::move(x), rate};
}

// Four amplitude-modulated filtered-noise breathing cycles; cycle-length
// irregularity and spectral tilt grow with s.
inline AudioClip synth_breath(double s, std::uint64_t seed, int rate = 16000) {
  LT_REQUIRE(s >= 0.0 && s <= 1.0, "synth_breath: s outside [0,1]");
  Rng identity(mix_seed(seed >> 32, 0xb2ea));
  Rng rng(mix_seed(seed, 0xb2e4));
  const double cycle_s = 0.44 + 0.03 * identity.uniform();
  constexpr int kCycles = 4;

  std::vector<double> x;
  for (int c = 0; c < kCycles; ++c) {
    const double irregularity = 1.0 + (0.01 + 0.22 * s) * (2.0 * rng.uniform() - 1.0);
    const int len = static_cast<int>(cycle_s * irregularity * rate);
    for (int i = 0; i < len; ++i) {
      const double env = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / len);
      x.push_back(env * rng.gauss());
    }
  }
  synth_detail::lowpass(x, 0.25 + 0.45 * s);
  synth_detail::fade_edges(x, rate / 100);
  synth_detail::scale_peak(x, 0.9);
  return AudioClip{std::move(x), static_cast<int>(rate)};
}

struct GeneratedParticipant {
  std::string id;
  Archetype archetype;
  double offset, gain;
  int lead_days;
};

struct GeneratedCohort {
  std::string manifest_path;
  std::string archetype_path;
  std::string severity_path;
  std::size_t n_rows = 0;
  std::vector<GeneratedParticipant> participants;
};

namespace synth_detail {

inline SeverityTrajectory make_trajectory(Archetype a, Rng& rng) {
  SeverityTrajectory t;
  t.archetype = a;
  switch (a) {
    case Archetype::healthy:
      t.baseline = rng.uniform(0.04, 0.14);
      break;
    case Archetype::recovering:
      // already sick at day 0 (s(0) >= ~0.55) and back below 0.5 within the
      // observed span
      t.baseline = rng.uniform(0.05, 0.12);
      t.rise_days = rng.uniform(3.0, 6.0);
      t.onset_day = -t.rise_days * rng.uniform(0.75, 1.1);
      t.peak = rng.uniform(0.78, 0.95);
      t.hold_days = rng.uniform(1.0, 4.0);
      t.decay_days = rng.uniform(6.0, 12.0);
      break;
    case Archetype::persistent_positive:
      t.baseline = rng.uniform(0.05, 0.12);
      t.onset_day = -10.0;
      t.rise_days = 4.0;
      t.peak = rng.uniform(0.70, 0.92);
      t.hold_days = 1e9;  // never decays in the observed span
      break;
    case Archetype::late_onset:
      t.baseline = rng.uniform(0.05, 0.15);
      t.onset_day = rng.uniform(8.0, 16.0);
      t.rise_days = rng.uniform(4.0, 7.0);
      t.peak = rng.uniform(0.75, 0.92);
      t.hold_days = 1e9;
      break;
  }
  return t;
}

inline int draw_gap(Rng& rng, double violation_rate) {
  if (rng.uniform() < violation_rate) return 15 + static_cast<int>(rng.bounded(6));
  const double u = rng.uniform();
  // skewed toward short intervals; median 3
  static constexpr double cdf[] = {0.14, 0.34, 0.58, 0.73, 0.83, 0.89, 0.93, 0.955, 0.97, 0.98, 0.988, 0.994, 0.998, 1.0};
  for (int g = 1; g <= 14; ++g)
    if (u <= cdf[g - 1]) return g;
  return 14;
}

template <typename Enum>
inline Enum draw_weighted(Rng& rng, const double* weights, int n) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    acc += weights[i];
    if (u <= acc) return static_cast<Enum>(i);
  }
  return static_cast<Enum>(n - 1);
}

}  // namespace synth_detail

// Writes WAV files plus the manifest and an archetype sidecar. Byte-identical
// output for identical specs.
inline GeneratedCohort generate_cohort(const CohortSpec& spec, const std::string& out_dir) {
  namespace fs = std::filesystem;
  using namespace synth_detail;
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "wavs", ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot create output directory " + out_dir);

  GeneratedCohort out;
  out.manifest_path = (fs::path(out_dir) / "manifest.csv").string();
  out.archetype_path = (fs::path(out_dir) / "archetypes.csv").string();
  out.severity_path = (fs::path(out_dir) / "severity.csv").string();
  std::ofstream manifest(out.manifest_path, std::ios::trunc);
  std::ofstream arch(out.archetype_path, std::ios::trunc);
  std::ofstream severity(out.severity_path, std::ios::trunc);
  if (!manifest || !arch || !severity)
    fail(ErrorKind::IoFailure, "cannot write manifest in " + out_dir);
  manifest << kManifestHeader << "\n";
  arch << "participant_id,archetype,acoustic_offset,acoustic_gain,acoustic_lead_days\n";
  severity << "participant_id,day,severity,acoustic\n";

  static constexpr double kGenderWeights[] = {0.49, 0.48, 0.03};
  static constexpr double kAgeWeights[] = {0.18, 0.26, 0.24, 0.20, 0.12};

  int pid_counter = 0;
  for (int a = 0; a < kNumArchetypes; ++a) {
    for (int i = 0; i < spec.per_archetype[static_cast<std::size_t>(a)]; ++i) {
      ++pid_counter;
      char pid[16];
      std::snprintf(pid, sizeof(pid), "P%04d", pid_counter);
      Rng rng(mix_seed(spec.seed, 0x9a27 + static_cast<std::uint64_t>(pid_counter)));

      const Archetype archetype = static_cast<Archetype>(a);
      const SeverityTrajectory curve = make_trajectory(archetype, rng);
      const double offset = rng.uniform(spec.acoustic_offset_min, spec.acoustic_offset_max);
      const double gain = rng.uniform(spec.acoustic_gain_min, spec.acoustic_gain_max);
      int lead = 0;
      if (spec.acoustic_lead_max_days > 0 && rng.uniform() >= 0.5)
        lead = 1 + static_cast<int>(
                       rng.bounded(static_cast<std::size_t>(spec.acoustic_lead_max_days)));
      const Language language =
          draw_weighted<Language>(rng, spec.language_weights.data(), kNumLanguages);
      const Gender gender = draw_weighted<Gender>(rng, kGenderWeights, 3);
      const AgeBand age = draw_weighted<AgeBand>(rng, kAgeWeights, 5);

      const int n_samples =
          spec.samples_min + static_cast<int>(rng.bounded(
                                 static_cast<std::size_t>(spec.samples_max - spec.samples_min + 1)));
      const std::uint64_t voice_id = rng.next_u64() & 0xffffffffULL;
      const std::uint64_t cough_id = rng.next_u64() & 0xffffffffULL;
      const std::uint64_t breath_id = rng.next_u64() & 0xffffffffULL;

      int day = 0;
      for (int k = 0; k < n_samples; ++k) {
        if (k > 0) day += draw_gap(rng, spec.gap_violation_rate);
        const double s = std::clamp(curve(day) + rng.uniform(-0.02, 0.02), 0.0, 1.0);
        const int label = s >= 0.5 ? 1 : 0;
        int symptoms = static_cast<int>(std::lround(6.0 * s)) +
                       (static_cast<int>(rng.bounded(3)) - 1);
        symptoms = std::max(0, symptoms);

        const double acoustic = std::clamp(
            offset + gain * (curve(day + lead) + rng.uniform(-0.05, 0.05)), 0.0, 1.0);

        const std::uint64_t nonce = static_cast<std::uint64_t>(k);
        const AudioClip voice = synth_voice(acoustic, (voice_id << 32) | nonce, spec.sample_rate);
        const AudioClip cough = synth_cough(acoustic, (cough_id << 32) | nonce, spec.sample_rate);
        const AudioClip breath = synth_breath(acoustic, (breath_id << 32) | nonce, spec.sample_rate);

        char name[64];
        std::snprintf(name, sizeof(name), "wavs/%s_d%03d_breath.wav", pid, day);
        write_wav((fs::path(out_dir) / name).string(), breath);
        std::string breath_rel = name;
        std::snprintf(name, sizeof(name), "wavs/%s_d%03d_cough.wav", pid, day);
        write_wav((fs::path(out_dir) / name).string(), cough);
        std::string cough_rel = name;
        std::snprintf(name, sizeof(name), "wavs/%s_d%03d_voice.wav", pid, day);
        write_wav((fs::path(out_dir) / name).string(), voice);
        std::string voice_rel = name;

        manifest << pid << ',' << day << ',' << breath_rel << ',' << cough_rel << ','
                 << voice_rel << ',' << (label ? "positive" : "negative") << ',' << symptoms << ','
                 << to_string(language) << ',' << to_string(gender) << ',' << to_string(age)
                 << "\n";
        char srow[128];
        std::snprintf(srow, sizeof(srow), "%s,%d,%.9f,%.9f\n", pid, day, s, acoustic);
        severity << srow;
        ++out.n_rows;
      }

      char arow[160];
      std::snprintf(arow, sizeof(arow), "%s,%s,%.6f,%.6f,%d\n", pid, to_string(archetype), offset,
                    gain, lead);
      arch << arow;
      out.participants.push_back({pid, archetype, offset, gain, lead});
    }
  }
  if (!manifest || !arch || !severity) fail(ErrorKind::IoFailure, "short write in " + out_dir);
  return out;
}

inline std::vector<GeneratedParticipant> read_archetypes_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoFailure, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<GeneratedParticipant> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = cohort_detail::split_csv_line(line);
    if (fields.size() != 5) fail(ErrorKind::ManifestParse, "bad archetype row: " + line);
    GeneratedParticipant p;
    p.id = fields[0];
    p.archetype = Archetype::healthy;
    for (int i = 0; i < kNumArchetypes; ++i)
      if (fields[1] == to_string(static_cast<Archetype>(i))) p.archetype = static_cast<Archetype>(i);
    p.offset = std::stod(fields[2]);
    p.gain = std::stod(fields[3]);
    p.lead_days = cohort_detail::parse_int(fields[4], "lead");
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace longtrack

#endif  // LONGTRACK_SYNTH_HPP
