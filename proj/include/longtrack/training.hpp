// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch training with participant-level splits, offline time-inverse and
// oversampling augmentation (train partition only), optional online
// perturbation at batch assembly, validation-AUROC model selection, and early
// stopping. Deterministic under (manifest, seed, config): batch gradients are
// reduced in a fixed order regardless of scheduling.
#ifndef LONGTRACK_TRAINING_HPP
#define LONGTRACK_TRAINING_HPP

#include <algorithm>
#include <fstream>
#include <numeric>
#include <string>
#include <thread>
#include <vector>

#include "longtrack/baseline.hpp"
#include "longtrack/cohort.hpp"
#include "longtrack/features.hpp"
#include "longtrack/metrics.hpp"
#include "longtrack/model.hpp"

namespace longtrack {

struct TrainConfig {
  std::uint64_t seed = 1;
  int epochs = 50;
  int batch_size = 16;
  double lr = 1e-3;
  int patience = 8;  // epochs without validation-AUROC improvement
  int threads = 0;   // 0 = hardware concurrency

  bool aug_time_inverse = true;
  bool aug_oversample = true;
  bool aug_perturb_online = false;
  double perturb_gain_db_min = -3.0;
  double perturb_gain_db_max = 3.0;
  double perturb_noise_snr_db = 25.0;

  std::array<double, 3> split_ratios = {0.70, 0.10, 0.20};

  ModelConfig model;
  FeatureParams features;

  void validate() const {
    LT_REQUIRE(epochs >= 1 && batch_size >= 1 && lr > 0.0 && patience >= 1,
               "TrainConfig: non-positive training parameter");
    LT_REQUIRE(perturb_gain_db_min <= perturb_gain_db_max, "TrainConfig: bad gain range");
    LT_REQUIRE(model.patch_frames == features.patch_frames && model.n_mels == features.mel.n_mels,
               "TrainConfig: model and feature dims disagree");
    model.validate();
  }

  int resolved_threads() const {
    if (threads > 0) return threads;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
  }
};

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_bce = 0.0;
  double val_auroc = 0.0;
};

struct TrainReport {
  std::vector<EpochStats> epochs;
  int best_epoch = 0;
  double best_val_auroc = 0.0;
};

inline void write_train_report_csv(const std::string& path, const TrainReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + path);
  out << "epoch,train_loss,train_bce,val_auroc\n";
  char buf[128];
  for (const auto& e : report.epochs) {
    std::snprintf(buf, sizeof(buf), "%d,%.9f,%.9f,%.9f\n", e.epoch, e.train_loss, e.train_bce,
                  e.val_auroc);
    out << buf;
  }
  out << "# best_epoch=" << report.best_epoch << "\n";
}

namespace train_detail {

inline void zero_tensors(ModelTensors& t) {
#define LONGTRACK_ZERO(member) t.member.setZero();
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_ZERO)
#undef LONGTRACK_ZERO
}

inline void add_tensors(ModelTensors& dst, const ModelTensors& src) {
#define LONGTRACK_ADD(member) dst.member += src.member;
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_ADD)
#undef LONGTRACK_ADD
}

inline void scale_tensors(ModelTensors& t, double s) {
#define LONGTRACK_SCALE(member) t.member *= s;
  LONGTRACK_MODEL_TENSOR_LIST(LONGTRACK_SCALE)
#undef LONGTRACK_SCALE
}

inline void zero_tensors(BaselineTensors& t) {
#define LONGTRACK_ZERO(member) t.member.setZero();
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_ZERO)
#undef LONGTRACK_ZERO
}

inline void add_tensors(BaselineTensors& dst, const BaselineTensors& src) {
#define LONGTRACK_ADD(member) dst.member += src.member;
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_ADD)
#undef LONGTRACK_ADD
}

inline void scale_tensors(BaselineTensors& t, double s) {
#define LONGTRACK_SCALE(member) t.member *= s;
  LONGTRACK_BASELINE_TENSOR_LIST(LONGTRACK_SCALE)
#undef LONGTRACK_SCALE
}

struct SampleEmbeds {
  EmbedResult breath, cough, voice;
  VectorXd fused;
};

inline SampleEmbeds embed_sample(const RecordingSample& s, const FeatureCache& cache,
                                 const ModelParams& p) {
  SampleEmbeds out;
  out.breath = embed_recording(cache.get(s.breath)->patches, p.tensors.embedder, p.config);
  out.cough = embed_recording(cache.get(s.cough)->patches, p.tensors.embedder, p.config);
  out.voice = embed_recording(cache.get(s.voice)->patches, p.tensors.embedder, p.config);
  out.fused = fuse_modalities(out.breath.embedding, out.cough.embedding, out.voice.embedding);
  return out;
}

inline void embed_sample_backward(const SampleEmbeds& emb, const VectorXd& d_fused,
                                  const ModelParams& p, ModelTensors& grads) {
  const int n = p.config.embed_dim;
  embed_backward(emb.breath.trace, d_fused.segment(0, n), p.tensors.embedder, p.config,
                 grads.embedder);
  embed_backward(emb.cough.trace, d_fused.segment(n, n), p.tensors.embedder, p.config,
                 grads.embedder);
  embed_backward(emb.voice.trace, d_fused.segment(2 * n, n), p.tensors.embedder, p.config,
                 grads.embedder);
}

// Forward + loss + full backward for one training window. Returns the loss.
inline LossResult window_step(const SequenceWindow& w, const FeatureCache& cache,
                              const ModelParams& p, ModelTensors& grads) {
  std::vector<SampleEmbeds> embeds;
  embeds.reserve(w.samples.size());
  std::vector<VectorXd> fused;
  std::vector<int> labels;
  for (const auto& s : w.samples) {
    embeds.push_back(embed_sample(s, cache, p));
    fused.push_back(embeds.back().fused);
    labels.push_back(static_cast<int>(s.label));
  }
  WindowForward fwd = forward_window(fused, p);
  LossResult loss = window_loss(fwd.probs, labels, fwd.lang_logits,
                                static_cast<int>(w.language), p.config.w_lang);
  std::vector<VectorXd> d_fused =
      backward_window(fwd.trace, loss.d_probs, loss.d_logits, p, grads);
  for (std::size_t t = 0; t < embeds.size(); ++t)
    embed_sample_backward(embeds[t], d_fused[t], p, grads);
  return loss;
}

// Forward-only final-step probability for validation scoring.
inline double window_score(const SequenceWindow& w, const FeatureCache& cache,
                           const ModelParams& p) {
  std::vector<VectorXd> fused;
  fused.reserve(w.samples.size());
  for (const auto& s : w.samples) fused.push_back(embed_sample(s, cache, p).fused);
  return forward_window(fused, p).probs(static_cast<int>(w.samples.size()) - 1);
}

inline std::vector<VectorXd> fused_window(const SequenceWindow& w, const FeatureCache& cache,
                                          const BaselineParams& p) {
  std::vector<VectorXd> fused;
  const std::size_t lo = p.kind == ModelKind::baseline_single ? w.samples.size() - 1 : 0;
  for (std::size_t t = lo; t < w.samples.size(); ++t) {
    const auto& s = w.samples[t];
    fused.push_back(fuse_modalities(
        embed_recording(cache.get(s.breath)->patches, p.tensors.embedder, p.config).embedding,
        embed_recording(cache.get(s.cough)->patches, p.tensors.embedder, p.config).embedding,
        embed_recording(cache.get(s.voice)->patches, p.tensors.embedder, p.config).embedding));
  }
  return fused;
}

// One BCE step for a baseline model; the target is the final day's label.
inline double baseline_window_step(const SequenceWindow& w, const FeatureCache& cache,
                                   const BaselineParams& p, BaselineTensors& grads) {
  const int n = p.config.embed_dim;
  std::vector<SampleEmbeds> embeds;
  std::vector<VectorXd> fused;
  const std::size_t lo = p.kind == ModelKind::baseline_single ? w.samples.size() - 1 : 0;
  for (std::size_t t = lo; t < w.samples.size(); ++t) {
    SampleEmbeds e;
    e.breath = embed_recording(cache.get(w.samples[t].breath)->patches, p.tensors.embedder, p.config);
    e.cough = embed_recording(cache.get(w.samples[t].cough)->patches, p.tensors.embedder, p.config);
    e.voice = embed_recording(cache.get(w.samples[t].voice)->patches, p.tensors.embedder, p.config);
    e.fused = fuse_modalities(e.breath.embedding, e.cough.embedding, e.voice.embedding);
    fused.push_back(e.fused);
    embeds.push_back(std::move(e));
  }
  VectorXd input = VectorXd::Zero(fused.front().size());
  for (const auto& f : fused) input += f;
  input /= static_cast<double>(fused.size());

  constexpr double kEps = 1e-12;
  const double y = static_cast<double>(w.samples.back().label == TestLabel::positive);
  const double prob = sigmoid(p.tensors.head_w.dot(input) + p.tensors.head_b(0));
  const double pc = std::clamp(prob, kEps, 1.0 - kEps);
  const double bce = -(y * std::log(pc) + (1.0 - y) * std::log(1.0 - pc));

  const double da = prob - y;  // dBCE/dlogit
  grads.head_w.noalias() += da * input;
  grads.head_b(0) += da;
  const VectorXd d_each = (da / static_cast<double>(fused.size())) * p.tensors.head_w;
  for (const auto& e : embeds) {
    embed_backward(e.breath.trace, d_each.segment(0, n), p.tensors.embedder, p.config,
                   grads.embedder);
    embed_backward(e.cough.trace, d_each.segment(n, n), p.tensors.embedder, p.config,
                   grads.embedder);
    embed_backward(e.voice.trace, d_each.segment(2 * n, n), p.tensors.embedder, p.config,
                   grads.embedder);
  }
  return bce;
}

}  // namespace train_detail

// Training windows for the train partition, with offline augmentation.
inline std::vector<SequenceWindow> assemble_train_windows(const Cohort& cohort,
                                                          const DatasetSplit& split,
                                                          const TrainConfig& cfg) {
  std::vector<SequenceWindow> windows;
  for (const auto& id : split.train) {
    const Participant* p = cohort.find(id);
    LT_REQUIRE(p != nullptr, "assemble_train_windows: unknown participant " + id);
    auto w = generate_windows(*p);
    windows.insert(windows.end(), w.begin(), w.end());
  }
  if (cfg.aug_time_inverse) {
    const std::size_t n = windows.size();
    windows.reserve(2 * n);
    for (std::size_t i = 0; i < n; ++i) windows.push_back(time_inverse_augment(windows[i]));
  }
  if (cfg.aug_oversample) {
    windows = oversample_balance(windows, mix_seed(cfg.seed, 0x0b5), cfg.perturb_gain_db_min,
                                 cfg.perturb_gain_db_max, cfg.perturb_noise_snr_db);
  }
  return windows;
}

inline std::vector<SequenceWindow> assemble_plain_windows(const Cohort& cohort,
                                                          const std::vector<std::string>& ids) {
  std::vector<SequenceWindow> windows;
  for (const auto& id : ids) {
    const Participant* p = cohort.find(id);
    LT_REQUIRE(p != nullptr, "assemble_plain_windows: unknown participant " + id);
    auto w = generate_windows(*p);
    windows.insert(windows.end(), w.begin(), w.end());
  }
  return windows;
}

struct TrainOutcome {
  ModelParams params;   // best-validation epoch
  AdamState adam;
  TrainReport report;
};

inline TrainOutcome train_sequential(const Cohort& cohort, const DatasetSplit& split,
                                     const TrainConfig& cfg) {
  using namespace train_detail;
  cfg.validate();
  std::vector<SequenceWindow> train_windows = assemble_train_windows(cohort, split, cfg);
  std::vector<SequenceWindow> val_windows = assemble_plain_windows(cohort, split.validation);
  if (train_windows.empty()) fail(ErrorKind::EmptyPartition, "no training windows");
  if (val_windows.empty()) fail(ErrorKind::EmptyPartition, "no validation windows");

  const int threads = cfg.resolved_threads();
  FeatureCache cache(cfg.features);
  for (const auto& w : train_windows) cache.add_window(w);
  for (const auto& w : val_windows) cache.add_window(w);
  cache.build(threads, cfg.aug_perturb_online);

  ModelParams params = init_params(cfg.model, cfg.seed);
  AdamState adam = make_adam_state(cfg.model);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  TrainOutcome out{params, adam, {}};
  out.report.best_val_auroc = -1.0;

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<ModelTensors> worker_grads;
  std::vector<double> worker_loss(static_cast<std::size_t>(threads));
  std::vector<double> worker_bce(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) worker_grads.push_back(make_zero_tensors(cfg.model));

  int epochs_since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0xe90c + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    std::vector<SequenceWindow> epoch_windows;
    const std::vector<SequenceWindow>* source = &train_windows;
    if (cfg.aug_perturb_online) {
      // fresh perturbation draws each epoch at batch assembly
      epoch_windows = train_windows;
      Rng perturb_rng(mix_seed(cfg.seed, 0x9e27 + static_cast<std::uint64_t>(epoch)));
      for (auto& w : epoch_windows)
        w = perturb_augment(w, cfg.perturb_gain_db_min, cfg.perturb_gain_db_max,
                            cfg.perturb_noise_snr_db, perturb_rng);
      source = &epoch_windows;
    }

    double epoch_loss = 0.0, epoch_bce = 0.0;
    for (std::size_t batch_lo = 0; batch_lo < order.size();
         batch_lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch_hi =
          std::min(order.size(), batch_lo + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t n = batch_hi - batch_lo;

      for (int t = 0; t < threads; ++t) {
        zero_tensors(worker_grads[static_cast<std::size_t>(t)]);
        worker_loss[static_cast<std::size_t>(t)] = 0.0;
        worker_bce[static_cast<std::size_t>(t)] = 0.0;
      }
      {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) {
          pool.emplace_back([&, t] {
            const std::size_t lo = n * static_cast<std::size_t>(t) / static_cast<std::size_t>(threads);
            const std::size_t hi =
                n * (static_cast<std::size_t>(t) + 1) / static_cast<std::size_t>(threads);
            for (std::size_t i = lo; i < hi; ++i) {
              const SequenceWindow& w = (*source)[order[batch_lo + i]];
              LossResult loss = window_step(w, cache, params, worker_grads[static_cast<std::size_t>(t)]);
              worker_loss[static_cast<std::size_t>(t)] += loss.total;
              worker_bce[static_cast<std::size_t>(t)] += loss.disease_bce;
            }
          });
        }
        for (auto& th : pool) th.join();
      }
      // fixed-order reduction: worker 0 then 1 then ...
      for (int t = 1; t < threads; ++t)
        add_tensors(worker_grads[0], worker_grads[static_cast<std::size_t>(t)]);
      scale_tensors(worker_grads[0], 1.0 / static_cast<double>(n));
      for (int t = 0; t < threads; ++t) {
        epoch_loss += worker_loss[static_cast<std::size_t>(t)];
        epoch_bce += worker_bce[static_cast<std::size_t>(t)];
      }
      adam_update(params, worker_grads[0], adam, adam_cfg);
    }

    // validation AUROC on final-step probabilities
    std::vector<double> scores(val_windows.size());
    std::vector<int> labels(val_windows.size());
    parallel_for(val_windows.size(), threads, [&](std::size_t i) {
      scores[i] = window_score(val_windows[i], cache, params);
      labels[i] = static_cast<int>(val_windows[i].samples.back().label);
    });
    double val_auroc = 0.5;
    const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                      std::count(labels.begin(), labels.end(), 0) > 0;
    if (both) val_auroc = auroc(scores, labels);

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(train_windows.size());
    stats.train_bce = epoch_bce / static_cast<double>(train_windows.size());
    stats.val_auroc = val_auroc;
    out.report.epochs.push_back(stats);

    // ties keep the later (longer-trained) epoch; patience counts only strict
    // improvement
    if (val_auroc >= out.report.best_val_auroc) {
      if (val_auroc > out.report.best_val_auroc)
        epochs_since_best = 0;
      else
        ++epochs_since_best;
      out.report.best_val_auroc = val_auroc;
      out.report.best_epoch = epoch;
      out.params = params;
      out.adam = adam;
      if (epochs_since_best >= cfg.patience) break;
    } else if (++epochs_since_best >= cfg.patience) {
      break;
    }
  }
  return out;
}

struct BaselineOutcome {
  BaselineParams params;
  BaselineAdamState adam;
  TrainReport report;
};

inline BaselineOutcome train_baseline(const Cohort& cohort, const DatasetSplit& split,
                                      const TrainConfig& cfg, ModelKind kind) {
  using namespace train_detail;
  cfg.validate();
  LT_REQUIRE(kind != ModelKind::sequential, "train_baseline: sequential kind");
  std::vector<SequenceWindow> train_windows = assemble_train_windows(cohort, split, cfg);
  std::vector<SequenceWindow> val_windows = assemble_plain_windows(cohort, split.validation);
  if (train_windows.empty()) fail(ErrorKind::EmptyPartition, "no training windows");
  if (val_windows.empty()) fail(ErrorKind::EmptyPartition, "no validation windows");

  const int threads = cfg.resolved_threads();
  FeatureCache cache(cfg.features);
  for (const auto& w : train_windows) cache.add_window(w);
  for (const auto& w : val_windows) cache.add_window(w);
  cache.build(threads, false);

  BaselineParams params = init_baseline_params(cfg.model, kind, cfg.seed);
  BaselineAdamState adam = make_baseline_adam_state(cfg.model);
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;

  BaselineOutcome out{params, adam, {}};
  out.report.best_val_auroc = -1.0;

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<BaselineTensors> worker_grads;
  std::vector<double> worker_loss(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) worker_grads.push_back(make_zero_baseline_tensors(cfg.model));

  int epochs_since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    Rng shuffle_rng(mix_seed(cfg.seed, 0xb1d + static_cast<std::uint64_t>(epoch)));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    for (std::size_t batch_lo = 0; batch_lo < order.size();
         batch_lo += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t batch_hi =
          std::min(order.size(), batch_lo + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t n = batch_hi - batch_lo;
      for (int t = 0; t < threads; ++t) {
        zero_tensors(worker_grads[static_cast<std::size_t>(t)]);
        worker_loss[static_cast<std::size_t>(t)] = 0.0;
      }
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
          const std::size_t lo = n * static_cast<std::size_t>(t) / static_cast<std::size_t>(threads);
          const std::size_t hi =
              n * (static_cast<std::size_t>(t) + 1) / static_cast<std::size_t>(threads);
          for (std::size_t i = lo; i < hi; ++i) {
            const SequenceWindow& w = train_windows[order[batch_lo + i]];
            worker_loss[static_cast<std::size_t>(t)] +=
                baseline_window_step(w, cache, params, worker_grads[static_cast<std::size_t>(t)]);
          }
        });
      }
      for (auto& th : pool) th.join();
      for (int t = 1; t < threads; ++t)
        add_tensors(worker_grads[0], worker_grads[static_cast<std::size_t>(t)]);
      scale_tensors(worker_grads[0], 1.0 / static_cast<double>(n));
      for (int t = 0; t < threads; ++t) epoch_loss += worker_loss[static_cast<std::size_t>(t)];
      adam_update(params, worker_grads[0], adam, adam_cfg);
    }

    std::vector<double> scores(val_windows.size());
    std::vector<int> labels(val_windows.size());
    parallel_for(val_windows.size(), threads, [&](std::size_t i) {
      scores[i] = baseline_score(fused_window(val_windows[i], cache, params), params);
      labels[i] = static_cast<int>(val_windows[i].samples.back().label);
    });
    double val_auroc = 0.5;
    const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                      std::count(labels.begin(), labels.end(), 0) > 0;
    if (both) val_auroc = auroc(scores, labels);

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = epoch_loss / static_cast<double>(train_windows.size());
    stats.train_bce = stats.train_loss;
    stats.val_auroc = val_auroc;
    out.report.epochs.push_back(stats);
    if (val_auroc >= out.report.best_val_auroc) {
      if (val_auroc > out.report.best_val_auroc)
        epochs_since_best = 0;
      else
        ++epochs_since_best;
      out.report.best_val_auroc = val_auroc;
      out.report.best_epoch = epoch;
      out.params = params;
      out.adam = adam;
      if (epochs_since_best >= cfg.patience) break;
    } else if (++epochs_since_best >= cfg.patience) {
      break;
    }
  }
  return out;
}

}  // namespace longtrack

#endif  // LONGTRACK_TRAINING_HPP
