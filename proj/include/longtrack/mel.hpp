// SPDX-License-Identifier: Apache-2.0
#ifndef LONGTRACK_MEL_HPP
#define LONGTRACK_MEL_HPP

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <vector>

#include "longtrack/audio.hpp"
#include "longtrack/common.hpp"

namespace longtrack {

struct MelParams {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int n_mels = 64;
  double fmin = 125.0;
  double fmax = 7500.0;
  double log_floor = 1e-6;

  void validate(int sample_rate) const {
    LT_REQUIRE(window_ms >= hop_ms, "MelParams: window shorter than hop");
    LT_REQUIRE(n_mels >= 1, "MelParams: n_mels < 1");
    LT_REQUIRE(fmin >= 0.0 && fmin < fmax && fmax <= sample_rate / 2.0,
               "MelParams: bad mel frequency range");
    LT_REQUIRE(log_floor > 0.0, "MelParams: log_floor must be positive");
  }
};

// n_frames x n_mels log mel energies.
struct LogMelFrames {
  Eigen::MatrixXd values;
  double frame_hop_s = 0.01;

  int n_frames() const { return static_cast<int>(values.rows()); }
  int n_mels() const { return static_cast<int>(values.cols()); }
};

struct PatchSet {
  std::vector<Eigen::MatrixXd> patches;  // each patch_frames x n_mels
  bool padded = false;
};

namespace mel_detail {

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// in-place radix-2 FFT
inline void fft(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace mel_detail

// Triangular mel filterbank geometry; band m spans [edges[m], edges[m+2]]
// with its apex at edges[m+1] (HTK mel scale).
struct MelFilterbank {
  int n_fft_bins;      // n_fft/2 + 1
  double bin_hz;       // Hz per FFT bin
  std::vector<double> edges_hz;  // n_mels + 2 edge frequencies
  // sparse per-bin weights: (band, weight) pairs, at most two bands per bin
  std::vector<std::vector<std::pair<int, double>>> bin_weights;

  // band index whose triangle contains f (apex-side lookup, for tests/tools)
  int band_containing(double f_hz) const {
    for (int m = 0; m + 2 < static_cast<int>(edges_hz.size()); ++m)
      if (f_hz >= edges_hz[m] && f_hz < edges_hz[m + 2]) {
        // pick the band whose apex is nearest
        int best = m;
        double best_d = std::abs(edges_hz[m + 1] - f_hz);
        for (int mm = m + 1; mm + 2 < static_cast<int>(edges_hz.size()) && f_hz >= edges_hz[mm];
             ++mm) {
          double d = std::abs(edges_hz[mm + 1] - f_hz);
          if (d < best_d) {
            best = mm;
            best_d = d;
          }
        }
        return best;
      }
    return -1;
  }
};

inline MelFilterbank make_mel_filterbank(const MelParams& params, int sample_rate, int n_fft) {
  using namespace mel_detail;
  MelFilterbank fb;
  fb.n_fft_bins = n_fft / 2 + 1;
  fb.bin_hz = static_cast<double>(sample_rate) / n_fft;
  const double mel_lo = hz_to_mel(params.fmin);
  const double mel_hi = hz_to_mel(params.fmax);
  fb.edges_hz.resize(params.n_mels + 2);
  for (int i = 0; i < params.n_mels + 2; ++i)
    fb.edges_hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (params.n_mels + 1));

  fb.bin_weights.assign(fb.n_fft_bins, {});
  for (int b = 0; b < fb.n_fft_bins; ++b) {
    const double f = b * fb.bin_hz;
    for (int m = 0; m < params.n_mels; ++m) {
      const double lo = fb.edges_hz[m], mid = fb.edges_hz[m + 1], hi = fb.edges_hz[m + 2];
      if (f <= lo || f >= hi) continue;
      const double w = f <= mid ? (f - lo) / (mid - lo) : (hi - f) / (hi - mid);
      if (w > 0.0) fb.bin_weights[b].emplace_back(m, w);
    }
  }
  return fb;
}

// Short-time log mel spectrogram: Hann-windowed power spectrum pooled by the
// triangular filterbank; values are ln(mel_energy + log_floor).
inline LogMelFrames log_mel(const AudioClip& clip, const MelParams& params) {
  using namespace mel_detail;
  params.validate(clip.sample_rate);
  const std::size_t win =
      static_cast<std::size_t>(std::llround(clip.sample_rate * params.window_ms / 1000.0));
  const std::size_t hop =
      static_cast<std::size_t>(std::llround(clip.sample_rate * params.hop_ms / 1000.0));
  LT_REQUIRE(win > 0 && hop > 0, "log_mel: degenerate window/hop");
  if (clip.samples.size() < win)
    fail(ErrorKind::TooShort, "log_mel: clip shorter than one analysis window");
  const std::size_t n_frames = (clip.samples.size() - win) / hop + 1;

  const std::size_t n_fft = next_pow2(win);
  const MelFilterbank fb = make_mel_filterbank(params, clip.sample_rate, static_cast<int>(n_fft));

  std::vector<double> window(win);
  for (std::size_t i = 0; i < win; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);

  LogMelFrames out;
  out.frame_hop_s = params.hop_ms / 1000.0;
  out.values.resize(static_cast<Eigen::Index>(n_frames), params.n_mels);

  std::vector<std::complex<double>> buf(n_fft);
  std::vector<double> mel_energy(params.n_mels);
  for (std::size_t fidx = 0; fidx < n_frames; ++fidx) {
    const double* src = clip.samples.data() + fidx * hop;
    for (std::size_t i = 0; i < win; ++i) buf[i] = src[i] * window[i];
    for (std::size_t i = win; i < n_fft; ++i) buf[i] = 0.0;
    fft(buf);
    std::fill(mel_energy.begin(), mel_energy.end(), 0.0);
    for (int b = 0; b < fb.n_fft_bins; ++b) {
      if (fb.bin_weights[b].empty()) continue;
      const double power = std::norm(buf[static_cast<std::size_t>(b)]);
      for (const auto& [m, w] : fb.bin_weights[b]) mel_energy[static_cast<std::size_t>(m)] += w * power;
    }
    for (int m = 0; m < params.n_mels; ++m)
      out.values(static_cast<Eigen::Index>(fidx), m) = std::log(mel_energy[static_cast<std::size_t>(m)] + params.log_floor);
  }
  return out;
}

// Splits frames into non-overlapping fixed-length patches; the remainder is
// dropped. Inputs shorter than one patch are padded by replicating the last
// frame, with the padded flag set.
inline PatchSet frame_patches(const LogMelFrames& frames, int patch_frames = 96) {
  LT_REQUIRE(patch_frames >= 1, "frame_patches: patch_frames < 1");
  LT_REQUIRE(frames.n_frames() >= 1, "frame_patches: no frames");
  PatchSet out;
  const int n = frames.n_frames();
  if (n < patch_frames) {
    Eigen::MatrixXd patch(patch_frames, frames.n_mels());
    patch.topRows(n) = frames.values;
    for (int r = n; r < patch_frames; ++r) patch.row(r) = frames.values.row(n - 1);
    out.patches.push_back(std::move(patch));
    out.padded = true;
    return out;
  }
  const int k = n / patch_frames;
  out.patches.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i)
    out.patches.push_back(frames.values.middleRows(i * patch_frames, patch_frames));
  return out;
}

}  // namespace longtrack

#endif  // LONGTRACK_MEL_HPP
