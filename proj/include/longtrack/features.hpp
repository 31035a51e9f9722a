// SPDX-License-Identifier: Apache-2.0
//
// Clip-to-patches feature pipeline: mono conversion, resampling to 16 kHz,
// silence trimming, optional gain/noise perturbation, peak normalization,
// log-mel extraction, fixed-length patching. Peak normalization runs after
// perturbation so pure gain changes do not alter features.
#ifndef LONGTRACK_FEATURES_HPP
#define LONGTRACK_FEATURES_HPP

#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "longtrack/audio.hpp"
#include "longtrack/cohort.hpp"
#include "longtrack/common.hpp"
#include "longtrack/mel.hpp"
#include "longtrack/wav.hpp"

namespace longtrack {

struct FeatureParams {
  MelParams mel;
  int target_rate = 16000;
  double trim_threshold_db = -40.0;
  double trim_frame_ms = 10.0;
  int patch_frames = 96;
  // fixed affine standardization of log-mel values before patching, keeping
  // network inputs O(1): (value + shift) / scale
  double mel_shift = 6.0;
  double mel_scale = 6.0;
};

// mono + 16 kHz + trimmed, not yet normalized
inline AudioClip preprocess_clip(const MultiChannelClip& raw, const FeatureParams& p) {
  AudioClip clip = to_mono(raw);
  clip = resample(clip, p.target_rate);
  return trim_silence(clip, p.trim_threshold_db, p.trim_frame_ms);
}

inline AudioClip apply_perturb(const AudioClip& clip, const PerturbSpec& spec) {
  AudioClip out = clip;
  const double gain = db_to_amplitude(spec.gain_db);
  for (double& s : out.samples) s *= gain;
  if (std::isfinite(spec.noise_snr_db)) {
    const double signal_rms = rms(out);
    const double noise_rms = signal_rms * db_to_amplitude(-spec.noise_snr_db);
    if (noise_rms > 0.0) {
      Rng rng(mix_seed(spec.noise_seed, 0x401e));
      for (double& s : out.samples) s += noise_rms * rng.gauss();
    }
  }
  return out;
}

// preprocessed (trimmed, unnormalized) clip -> patches
inline PatchSet clip_to_patches(const AudioClip& preprocessed,
                                const std::optional<PerturbSpec>& perturb,
                                const FeatureParams& p) {
  AudioClip clip = perturb ? apply_perturb(preprocessed, *perturb) : preprocessed;
  clip = normalize_peak(clip);
  LogMelFrames frames = log_mel(clip, p.mel);
  LT_REQUIRE(p.mel_scale > 0.0, "clip_to_patches: mel_scale must be positive");
  frames.values = (frames.values.array() + p.mel_shift) / p.mel_scale;
  return frame_patches(frames, p.patch_frames);
}

inline PatchSet featurize_file(const ModalityClip& clip, const FeatureParams& p) {
  const AudioClip preprocessed = preprocess_clip(load_wav(clip.path), p);
  return clip_to_patches(preprocessed, clip.perturb, p);
}

// Precomputed patch sets for every clip referenced by the training and
// evaluation windows. Clips carrying perturbation specs unknown at build time
// (online augmentation) are derived on demand from a preprocessed-clip cache;
// lookups after build are read-only and thread-safe.
class FeatureCache {
 public:
  explicit FeatureCache(FeatureParams params) : params_(std::move(params)) {}

  const FeatureParams& params() const { return params_; }

  static std::string key(const ModalityClip& clip) {
    std::string k = clip.path;
    if (clip.perturb) {
      k += '|';
      k += std::to_string(std::bit_cast<std::uint64_t>(clip.perturb->gain_db));
      k += ':';
      k += std::to_string(std::bit_cast<std::uint64_t>(clip.perturb->noise_snr_db));
      k += ':';
      k += std::to_string(clip.perturb->noise_seed);
    }
    return k;
  }

  // Registers clips for precomputation; call before build().
  void add(const ModalityClip& clip) {
    const std::string k = key(clip);
    if (pending_.emplace(k, clip).second) order_.push_back(k);
  }

  void add_sample(const RecordingSample& s) {
    add(s.breath);
    add(s.cough);
    add(s.voice);
  }

  void add_window(const SequenceWindow& w) {
    for (const auto& s : w.samples) add_sample(s);
  }

  void build(int threads, bool keep_preprocessed = false) {
    std::vector<const ModalityClip*> clips;
    clips.reserve(order_.size());
    for (const auto& k : order_) clips.push_back(&pending_.at(k));
    std::vector<std::shared_ptr<const PatchSet>> slots(clips.size());
    std::vector<std::shared_ptr<const AudioClip>> pre_slots(clips.size());
    parallel_for(clips.size(), threads, [&](std::size_t i) {
      auto pre = std::make_shared<AudioClip>(preprocess_clip(load_wav(clips[i]->path), params_));
      slots[i] = std::make_shared<PatchSet>(clip_to_patches(*pre, clips[i]->perturb, params_));
      if (keep_preprocessed) pre_slots[i] = std::move(pre);
    });
    for (std::size_t i = 0; i < clips.size(); ++i) {
      patches_.emplace(order_[i], std::move(slots[i]));
      if (keep_preprocessed) preprocessed_.emplace(clips[i]->path, std::move(pre_slots[i]));
    }
    pending_.clear();
    order_.clear();
  }

  // Lookup; falls back to on-the-fly derivation for clips perturbed after
  // build (requires keep_preprocessed at build time).
  std::shared_ptr<const PatchSet> get(const ModalityClip& clip) const {
    auto it = patches_.find(key(clip));
    if (it != patches_.end()) return it->second;
    auto pre = preprocessed_.find(clip.path);
    LT_REQUIRE(pre != preprocessed_.end(),
               "FeatureCache: clip not cached and no preprocessed audio kept: " + clip.path);
    return std::make_shared<PatchSet>(clip_to_patches(*pre->second, clip.perturb, params_));
  }

 private:
  FeatureParams params_;
  std::unordered_map<std::string, ModalityClip> pending_;
  std::vector<std::string> order_;
  std::unordered_map<std::string, std::shared_ptr<const PatchSet>> patches_;
  std::unordered_map<std::string, std::shared_ptr<const AudioClip>> preprocessed_;
};

}  // namespace longtrack

#endif  // LONGTRACK_FEATURES_HPP
