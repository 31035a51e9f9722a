// SPDX-License-Identifier: Apache-2.0
//
// Inference-time trajectory construction: variable-length GRU sequences over
// all of a participant's recordings within the 56-day lookback, evaluated
// from the second sample onward. Days whose history falls entirely outside
// the lookback are skipped and reported.
#ifndef LONGTRACK_TRAJECTORY_HPP
#define LONGTRACK_TRAJECTORY_HPP

#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "longtrack/baseline.hpp"
#include "longtrack/cohort.hpp"
#include "longtrack/features.hpp"
#include "longtrack/model.hpp"

namespace longtrack {

constexpr int kLookbackDays = 56;

struct TrajectoryPoint {
  int day = 0;
  double probability = 0.0;
  bool predicted_positive = false;  // probability >= 0.5
  TestLabel label = TestLabel::negative;
};

struct Trajectory {
  std::string participant_id;
  std::vector<TrajectoryPoint> points;   // days strictly increasing
  std::vector<int> skipped_days;         // evaluable position but no in-window history
};

// Shared embedding memo for scoring many days of one cohort against fixed
// parameters. Read-only over the checkpoint.
class SequentialScorer {
 public:
  SequentialScorer(const ModelParams& params, const FeatureCache& cache)
      : params_(params), cache_(cache) {}

  const ModelParams& params() const { return params_; }

  const VectorXd& fused(const RecordingSample& s) {
    const std::string k = s.participant_id + "#" + std::to_string(s.day);
    auto it = memo_.find(k);
    if (it != memo_.end()) return it->second;
    VectorXd f = fuse_modalities(
        embed_recording(cache_.get(s.breath)->patches, params_.tensors.embedder, params_.config)
            .embedding,
        embed_recording(cache_.get(s.cough)->patches, params_.tensors.embedder, params_.config)
            .embedding,
        embed_recording(cache_.get(s.voice)->patches, params_.tensors.embedder, params_.config)
            .embedding);
    return memo_.emplace(k, std::move(f)).first->second;
  }

  // History for a prediction at `day`: every sample with day' in
  // [day - lookback, day], in day order, current day included.
  std::vector<const RecordingSample*> history(const Participant& p, int day,
                                              int lookback = kLookbackDays) const {
    std::vector<const RecordingSample*> h;
    bool has_current = false;
    for (const auto& s : p.samples) {
      if (s.day > day) break;
      if (s.day >= day - lookback) {
        h.push_back(&s);
        if (s.day == day) has_current = true;
      }
    }
    if (!has_current) fail(ErrorKind::NoHistory, "predict_day: no sample on requested day");
    if (h.size() < 2)
      fail(ErrorKind::NoHistory, "predict_day: no prior sample within the lookback window");
    return h;
  }

  double predict_day(const Participant& p, int day, int lookback = kLookbackDays) {
    VectorXd h_final;
    return run(p, day, lookback, &h_final);
  }

  // Final-step GRU hidden state for the latent-space analysis.
  VectorXd latent_day(const Participant& p, int day, int lookback = kLookbackDays) {
    VectorXd h_final;
    run(p, day, lookback, &h_final);
    return h_final;
  }

  Trajectory predict_trajectory(const Participant& p, int lookback = kLookbackDays) {
    if (p.samples.size() < 2)
      fail(ErrorKind::TooFewSamples, "predict_trajectory: participant " + p.id +
                                         " has fewer than 2 samples");
    Trajectory out;
    out.participant_id = p.id;
    for (std::size_t i = 1; i < p.samples.size(); ++i) {
      const int day = p.samples[i].day;
      try {
        const double prob = predict_day(p, day, lookback);
        out.points.push_back({day, prob, prob >= 0.5, p.samples[i].label});
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoHistory) throw;
        out.skipped_days.push_back(day);
      }
    }
    return out;
  }

  std::vector<std::pair<int, VectorXd>> extract_latents(const Participant& p,
                                                        int lookback = kLookbackDays) {
    if (p.samples.size() < 2)
      fail(ErrorKind::TooFewSamples, "extract_latents: participant " + p.id +
                                         " has fewer than 2 samples");
    std::vector<std::pair<int, VectorXd>> out;
    for (std::size_t i = 1; i < p.samples.size(); ++i) {
      const int day = p.samples[i].day;
      try {
        out.emplace_back(day, latent_day(p, day, lookback));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoHistory) throw;
      }
    }
    return out;
  }

 private:
  double run(const Participant& p, int day, int lookback, VectorXd* h_final) {
    const auto hist = history(p, day, lookback);
    std::vector<VectorXd> seq;
    seq.reserve(hist.size());
    for (const RecordingSample* s : hist) seq.push_back(fused(*s));
    WindowForward fwd = forward_window(seq, params_);
    *h_final = fwd.trace.h.back();
    return fwd.probs(static_cast<int>(seq.size()) - 1);
  }

  const ModelParams& params_;
  const FeatureCache& cache_;
  std::unordered_map<std::string, VectorXd> memo_;
};

// Baseline scoring with the sequential model's eligibility rule (so all
// systems are compared on the identical set of participant-days).
class BaselineScorer {
 public:
  BaselineScorer(const BaselineParams& params, const FeatureCache& cache)
      : params_(params), cache_(cache) {}

  double predict_day(const Participant& p, int day, int lookback = kLookbackDays) {
    std::vector<const RecordingSample*> h;
    bool has_current = false;
    for (const auto& s : p.samples) {
      if (s.day > day) break;
      if (s.day >= day - lookback) {
        h.push_back(&s);
        if (s.day == day) has_current = true;
      }
    }
    if (!has_current || h.size() < 2)
      fail(ErrorKind::NoHistory, "baseline predict_day: insufficient history");
    std::vector<VectorXd> seq;
    if (params_.kind == ModelKind::baseline_single) {
      seq.push_back(fused(*h.back()));
    } else {
      for (const RecordingSample* s : h) seq.push_back(fused(*s));
    }
    return baseline_score(seq, params_);
  }

 private:
  const VectorXd& fused(const RecordingSample& s) {
    const std::string k = s.participant_id + "#" + std::to_string(s.day);
    auto it = memo_.find(k);
    if (it != memo_.end()) return it->second;
    VectorXd f = fuse_modalities(
        embed_recording(cache_.get(s.breath)->patches, params_.tensors.embedder, params_.config)
            .embedding,
        embed_recording(cache_.get(s.cough)->patches, params_.tensors.embedder, params_.config)
            .embedding,
        embed_recording(cache_.get(s.voice)->patches, params_.tensors.embedder, params_.config)
            .embedding);
    return memo_.emplace(k, std::move(f)).first->second;
  }

  const BaselineParams& params_;
  const FeatureCache& cache_;
  std::unordered_map<std::string, VectorXd> memo_;
};

// predict_day / predict_trajectory / extract_latents without scorer reuse
inline double predict_day(const Participant& p, int day, const ModelParams& params,
                          const FeatureCache& cache, int lookback = kLookbackDays) {
  SequentialScorer scorer(params, cache);
  return scorer.predict_day(p, day, lookback);
}

inline Trajectory predict_trajectory(const Participant& p, const ModelParams& params,
                                     const FeatureCache& cache, int lookback = kLookbackDays) {
  SequentialScorer scorer(params, cache);
  return scorer.predict_trajectory(p, lookback);
}

inline std::vector<std::pair<int, VectorXd>> extract_latents(const Participant& p,
                                                             const ModelParams& params,
                                                             const FeatureCache& cache,
                                                             int lookback = kLookbackDays) {
  SequentialScorer scorer(params, cache);
  return scorer.extract_latents(p, lookback);
}

inline void write_trajectory_csv(const std::string& path, const Trajectory& t) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path);
  out << "participant_id,day,probability,predicted_class,label\n";
  char buf[160];
  for (const auto& pt : t.points) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%.9f,%s,%s\n", t.participant_id.c_str(), pt.day,
                  pt.probability, pt.predicted_positive ? "positive" : "negative",
                  to_string(pt.label));
    out << buf;
  }
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoFailure, "cannot open trajectory file " + path);
  std::string line;
  if (!std::getline(in, line))
    fail(ErrorKind::ManifestParse, "empty trajectory file " + path);
  Trajectory t;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = cohort_detail::split_csv_line(line);
    if (fields.size() != 5) fail(ErrorKind::ManifestParse, "bad trajectory row: " + line);
    TrajectoryPoint pt;
    t.participant_id = fields[0];
    pt.day = cohort_detail::parse_int(fields[1], "day");
    try {
      pt.probability = std::stod(fields[2]);
    } catch (const std::exception&) {
      fail(ErrorKind::ManifestParse, "bad probability: " + fields[2]);
    }
    pt.predicted_positive = fields[3] == "positive";
    pt.label = parse_label(fields[4]);
    t.points.push_back(pt);
  }
  return t;
}

}  // namespace longtrack

#endif  // LONGTRACK_TRAJECTORY_HPP
