// SPDX-License-Identifier: Apache-2.0
#ifndef LONGTRACK_AUDIO_HPP
#define LONGTRACK_AUDIO_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "longtrack/common.hpp"

namespace longtrack {

// Mono waveform, amplitudes in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
};

// Raw decoded WAV content prior to mono conversion.
struct MultiChannelClip {
  std::vector<std::vector<double>> channels;  // equal lengths
  int sample_rate = 0;
};

inline double peak_amplitude(const AudioClip& clip) {
  double peak = 0.0;
  for (double s : clip.samples) peak = std::max(peak, std::abs(s));
  return peak;
}

inline double rms(const std::vector<double>& samples, std::size_t begin, std::size_t end) {
  if (end <= begin) return 0.0;
  double acc = 0.0;
  for (std::size_t i = begin; i < end; ++i) acc += samples[i] * samples[i];
  return std::sqrt(acc / static_cast<double>(end - begin));
}

inline double rms(const AudioClip& clip) { return rms(clip.samples, 0, clip.samples.size()); }

inline AudioClip to_mono(const MultiChannelClip& multi) {
  LT_REQUIRE(!multi.channels.empty(), "to_mono: no channels");
  AudioClip out;
  out.sample_rate = multi.sample_rate;
  std::size_t n = multi.channels.front().size();
  out.samples.resize(n);
  if (multi.channels.size() == 1) {
    out.samples = multi.channels.front();
    return out;
  }
  const double inv = 1.0 / static_cast<double>(multi.channels.size());
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (const auto& ch : multi.channels) acc += ch[i];
    out.samples[i] = acc * inv;
  }
  return out;
}

inline AudioClip to_mono(const AudioClip& clip) { return clip; }

namespace detail {

// zeroth-order modified Bessel function, power series
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double half_x = x / 2.0;
  for (int k = 1; k < 64; ++k) {
    term *= (half_x / k) * (half_x / k);
    sum += term;
    if (term < 1e-16 * sum) break;
  }
  return sum;
}

inline double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  const double px = M_PI * x;
  return std::sin(px) / px;
}

}  // namespace detail

// Band-limited resampling with a Kaiser-windowed sinc kernel (beta 8).
// Output length is round(n * target/source), so duration is preserved to
// within one output sample. Same-rate input is passed through bit-identically.
inline AudioClip resample(const AudioClip& clip, int target_rate) {
  LT_REQUIRE(target_rate > 0, "resample: target_rate must be positive");
  if (clip.sample_rate == target_rate) return clip;

  const double ratio = static_cast<double>(target_rate) / clip.sample_rate;
  const std::size_t in_n = clip.samples.size();
  const std::size_t out_n =
      static_cast<std::size_t>(std::llround(static_cast<double>(in_n) * ratio));

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.assign(out_n, 0.0);
  if (in_n == 0 || out_n == 0) {
    fail(ErrorKind::DegenerateSignal, "resample: empty signal");
  }

  constexpr double kBeta = 8.0;
  constexpr double kRolloff = 0.945;
  constexpr int kZeroCrossings = 32;
  // cutoff as a fraction of the source rate (<= 0.5)
  const double fc = 0.5 * std::min(1.0, ratio) * kRolloff;
  const double half_width = kZeroCrossings / (2.0 * fc);
  const double i0_beta = detail::bessel_i0(kBeta);

  for (std::size_t j = 0; j < out_n; ++j) {
    const double center = static_cast<double>(j) / ratio;
    const long k_lo = static_cast<long>(std::ceil(center - half_width));
    const long k_hi = static_cast<long>(std::floor(center + half_width));
    double acc = 0.0;
    for (long k = std::max<long>(0, k_lo); k <= std::min<long>(in_n - 1, k_hi); ++k) {
      const double u = (k - center) / half_width;  // in [-1, 1]
      const double window = detail::bessel_i0(kBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0_beta;
      acc += clip.samples[static_cast<std::size_t>(k)] * 2.0 * fc *
             detail::sinc(2.0 * fc * (k - center)) * window;
    }
    out.samples[j] = acc;
  }
  return out;
}

// Removes leading and trailing frames whose RMS falls below threshold_db
// (dB re full scale). Cuts at frame boundaries so the operation is idempotent.
inline AudioClip trim_silence(const AudioClip& clip, double threshold_db = -40.0,
                              double frame_ms = 10.0) {
  LT_REQUIRE(!clip.samples.empty(), "trim_silence: empty clip");
  const std::size_t frame_len = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(clip.sample_rate * frame_ms / 1000.0)));
  const std::size_t n = clip.samples.size();
  const std::size_t n_frames = (n + frame_len - 1) / frame_len;
  const double threshold_amp = db_to_amplitude(threshold_db);

  std::size_t first_loud = n_frames, last_loud = 0;
  bool any_loud = false;
  for (std::size_t f = 0; f < n_frames; ++f) {
    const std::size_t begin = f * frame_len;
    const std::size_t end = std::min(n, begin + frame_len);
    if (rms(clip.samples, begin, end) >= threshold_amp) {
      if (!any_loud) first_loud = f;
      last_loud = f;
      any_loud = true;
    }
  }
  if (!any_loud) fail(ErrorKind::EmptyAfterTrim, "trim_silence: no frame above threshold");

  AudioClip out;
  out.sample_rate = clip.sample_rate;
  const std::size_t begin = first_loud * frame_len;
  const std::size_t end = std::min(n, (last_loud + 1) * frame_len);
  out.samples.assign(clip.samples.begin() + begin, clip.samples.begin() + end);
  return out;
}

// Scales so the peak magnitude is exactly 1. Pure scaling, idempotent.
inline AudioClip normalize_peak(const AudioClip& clip) {
  LT_REQUIRE(!clip.samples.empty(), "normalize_peak: empty clip");
  const double peak = peak_amplitude(clip);
  if (peak == 0.0) fail(ErrorKind::DegenerateSignal, "normalize_peak: all-zero signal");
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  out.samples.resize(clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    out.samples[i] = clip.samples[i] / peak;
  return out;
}

enum class QualityVerdict { ok, too_short, too_quiet, clipped };

inline const char* quality_verdict_name(QualityVerdict v) {
  switch (v) {
    case QualityVerdict::ok: return "ok";
    case QualityVerdict::too_short: return "too_short";
    case QualityVerdict::too_quiet: return "too_quiet";
    case QualityVerdict::clipped: return "clipped";
  }
  return "unknown";
}

// Heuristic recording-quality gate: duration >= 0.5 s, post-trim RMS >= -45
// dBFS, and fewer than 1% full-scale samples.
inline QualityVerdict quality_check(const AudioClip& clip) {
  if (clip.samples.empty() || clip.duration_s() < 0.5) return QualityVerdict::too_short;
  AudioClip trimmed;
  try {
    trimmed = trim_silence(clip);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::EmptyAfterTrim) return QualityVerdict::too_quiet;
    throw;
  }
  if (amplitude_to_db(rms(trimmed)) < -45.0) return QualityVerdict::too_quiet;
  std::size_t full_scale = 0;
  for (double s : clip.samples)
    if (std::abs(s) >= 0.999) ++full_scale;
  if (full_scale * 100 >= clip.samples.size()) return QualityVerdict::clipped;
  return QualityVerdict::ok;
}

}  // namespace longtrack

#endif  // LONGTRACK_AUDIO_HPP
