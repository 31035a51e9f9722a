// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite: one pass/fail line per criterion.
//   1. gradient exactness on a reduced model, through the reversal path
//   2. metric implementations against independent oracles
//   3. pipeline invariants (windows, splits, lookback, checkpoints, determinism)
//   4. end-to-end synthetic reproduction on a 120-participant cohort
//   5. DSP checks
#include <chrono>
#include <complex>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "longtrack/checkpoint.hpp"
#include "longtrack/evaluation.hpp"
#include "longtrack/synth.hpp"
#include "longtrack/training.hpp"

using namespace longtrack;

namespace {

struct Harness {
  int failures = 0;

  void check(bool ok, const std::string& what) {
    if (!ok) ++failures;
    std::printf("  %s  %s\n", ok ? "ok  " : "FAIL", what.c_str());
    std::fflush(stdout);
  }
};

std::string fmt(const std::string& pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[320];
  std::snprintf(buf, sizeof(buf), pattern.c_str(), a, b, c);
  return buf;
}

double now_s() {
  static const auto start = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::filesystem::path work_dir() {
  auto dir = std::filesystem::temp_directory_path() / "longtrack_acceptance";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

// ---------------------------------------------------------------------------
// criterion 1: gradient exactness
// ---------------------------------------------------------------------------

ModelConfig reduced_config() {
  ModelConfig c;
  c.patch_frames = 16;
  c.n_mels = 12;
  c.conv1_channels = 2;
  c.conv2_channels = 3;
  c.embed_dim = 8;
  c.hidden_dim = 4;
  c.lambda_rev = 1.0;
  c.w_lang = 0.1;
  return c;
}

struct WindowInstance {
  std::vector<std::array<std::vector<Eigen::MatrixXd>, 3>> samples;
  std::vector<int> labels;
  int lang_label = 3;
};

WindowInstance random_window(const ModelConfig& c, std::uint64_t seed) {
  WindowInstance inst;
  Rng rng(seed);
  for (int t = 0; t < 5; ++t) {
    std::array<std::vector<Eigen::MatrixXd>, 3> mods;
    for (auto& m : mods) {
      Eigen::MatrixXd patch(c.patch_frames, c.n_mels);
      for (Eigen::Index i = 0; i < patch.size(); ++i) patch.data()[i] = rng.uniform(-1.0, 1.0);
      m.push_back(std::move(patch));
    }
    inst.samples.push_back(std::move(mods));
    inst.labels.push_back(static_cast<int>(rng.bounded(2)));
  }
  return inst;
}

struct ForwardOut {
  LossResult loss;
  std::vector<std::array<EmbedTrace, 3>> traces;
  ForwardTrace window;
};

ForwardOut fwd_full(const WindowInstance& inst, const ModelParams& p) {
  ForwardOut out;
  std::vector<VectorXd> fused;
  for (const auto& mods : inst.samples) {
    EmbedResult b = embed_recording(mods[0], p.tensors.embedder, p.config);
    EmbedResult c = embed_recording(mods[1], p.tensors.embedder, p.config);
    EmbedResult v = embed_recording(mods[2], p.tensors.embedder, p.config);
    fused.push_back(fuse_modalities(b.embedding, c.embedding, v.embedding));
    out.traces.push_back({std::move(b.trace), std::move(c.trace), std::move(v.trace)});
  }
  WindowForward fwd = forward_window(fused, p);
  out.loss =
      window_loss(fwd.probs, inst.labels, fwd.lang_logits, inst.lang_label, p.config.w_lang);
  out.window = std::move(fwd.trace);
  return out;
}

ModelTensors bwd_full(const WindowInstance& inst, const ModelParams& p, const ForwardOut& f) {
  ModelTensors grads = make_zero_tensors(p.config);
  auto d_fused = backward_window(f.window, f.loss.d_probs, f.loss.d_logits, p, grads);
  const int n = p.config.embed_dim;
  for (std::size_t t = 0; t < inst.samples.size(); ++t)
    for (int m = 0; m < 3; ++m)
      embed_backward(f.traces[t][static_cast<std::size_t>(m)], d_fused[t].segment(m * n, n),
                     p.tensors.embedder, p.config, grads.embedder);
  return grads;
}

void criterion_gradients(Harness& h) {
  const double t_start = now_s();
  ModelConfig c = reduced_config();
  ModelParams params = init_params(c, 20268);
  WindowInstance inst = random_window(c, 4242);

  const ForwardOut base = fwd_full(inst, params);
  const ModelTensors analytic = bwd_full(inst, params, base);

  // central finite differences of the two loss terms, combined with the
  // reversal-path sign: shared tensors -lambda, language head +1
  const double eps = 1e-5;
  double max_rel = 0.0;
  std::string worst;
  long n_params = 0;
  for_each_tensor(params.tensors, [&](const char* name, auto& tensor) {
    const std::string n(name);
    const bool lang_head = n.rfind("heads.lang", 0) == 0;
    const double* grad = nullptr;
    for_each_tensor(const_cast<ModelTensors&>(analytic), [&](const char* g, auto& t) {
      if (n == g) grad = t.data();
    });
    for (Eigen::Index i = 0; i < tensor.size(); ++i) {
      ++n_params;
      const double saved = tensor.data()[i];
      tensor.data()[i] = saved + eps;
      const ForwardOut up = fwd_full(inst, params);
      tensor.data()[i] = saved - eps;
      const ForwardOut dn = fwd_full(inst, params);
      tensor.data()[i] = saved;
      const double fd_bce = (up.loss.disease_bce - dn.loss.disease_bce) / (2 * eps);
      const double fd_ce = (up.loss.language_ce - dn.loss.language_ce) / (2 * eps);
      const double expected = fd_bce + c.w_lang * (lang_head ? 1.0 : -c.lambda_rev) * fd_ce;
      const double got = grad[i];
      const double rel = std::abs(got - expected) /
                         std::max(1e-6, std::max(std::abs(got), std::abs(expected)));
      if (rel > max_rel) {
        max_rel = rel;
        worst = n;
      }
    }
  });
  const double elapsed = now_s() - t_start;
  h.check(max_rel < 1e-4,
          fmt("analytic vs central finite differences: max relative error %.3g over %.0f "
              "parameters (worst: " + worst + ")",
              max_rel, static_cast<double>(n_params)));
  h.check(elapsed < 10.0, fmt("gradient check runtime %.2f s (< 10 s)", elapsed));
}

// ---------------------------------------------------------------------------
// criterion 2: metric oracles
// ---------------------------------------------------------------------------

double auroc_pairwise(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0.0;
  long pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!y[i]) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j]) continue;
      ++pairs;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / static_cast<double>(pairs);
}

double dtw_exhaustive(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::vector<double>> memo(a.size(), std::vector<double>(b.size(), -1.0));
  std::function<double(std::size_t, std::size_t)> go = [&](std::size_t i, std::size_t j) {
    const double c = std::abs(a[i] - b[j]);
    if (i == 0 && j == 0) return c;
    if (memo[i][j] >= 0.0) return memo[i][j];
    double best = std::numeric_limits<double>::infinity();
    if (i > 0) best = std::min(best, go(i - 1, j));
    if (j > 0) best = std::min(best, go(i, j - 1));
    if (i > 0 && j > 0) best = std::min(best, go(i - 1, j - 1));
    return memo[i][j] = c + best;
  };
  return go(a.size() - 1, b.size() - 1);
}

// cyclic Jacobi sweep eigensolver, independent of Eigen's
Eigen::VectorXd jacobi_eig(Eigen::MatrixXd a) {
  const Eigen::Index n = a.rows();
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-24) break;
    for (Eigen::Index p = 0; p < n; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t =
            (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0), sn = t * cs;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = cs * akp - sn * akq;
          a(k, q) = sn * akp + cs * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = cs * apk - sn * aqk;
          a(q, k) = sn * apk + cs * aqk;
        }
      }
    }
  }
  Eigen::VectorXd ev = a.diagonal();
  std::sort(ev.data(), ev.data() + n, std::greater<double>());
  return ev;
}

void criterion_metric_oracles(Harness& h) {
  const double t_start = now_s();
  Rng rng(26100);

  double worst_auroc = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 10 + rng.bounded(191);
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      s.push_back(std::round(rng.uniform() * 25.0) / 25.0);
      y.push_back(static_cast<int>(rng.bounded(2)));
    }
    y[0] = 1;
    y[1] = 0;
    worst_auroc = std::max(worst_auroc, std::abs(auroc(s, y) - auroc_pairwise(s, y)));
  }
  h.check(worst_auroc < 1e-12,
          fmt("auroc vs pairwise Mann-Whitney oracle: max |diff| %.3g over 100 instances",
              worst_auroc));

  double worst_pb = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> probs;
    std::vector<int> labels;
    for (int i = 0; i < 40; ++i) {
      probs.push_back(rng.uniform());
      labels.push_back(static_cast<int>(rng.bounded(2)));
    }
    labels[0] = 1;
    labels[1] = 0;
    double mp = 0, ml = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      mp += probs[i];
      ml += labels[i];
    }
    mp /= 40;
    ml /= 40;
    double num = 0, vp = 0, vl = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const double dp = probs[i] - mp;
      const double dl = labels[i] - ml;
      num += dp * dl;
      vp += dp * dp;
      vl += dl * dl;
    }
    worst_pb = std::max(worst_pb,
                        std::abs(point_biserial(probs, labels) - num / std::sqrt(vp * vl)));
  }
  h.check(worst_pb < 1e-12, fmt("point_biserial vs Pearson-on-binary: max |diff| %.3g", worst_pb));

  double worst_dtw = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.bounded(5), m = 2 + rng.bounded(5);
    std::vector<double> a, b;
    for (std::size_t i = 0; i < n; ++i) a.push_back(rng.uniform());
    for (std::size_t j = 0; j < m; ++j) b.push_back(rng.uniform());
    worst_dtw = std::max(worst_dtw, std::abs(dtw_align(a, b).cost - dtw_exhaustive(a, b)));
  }
  h.check(worst_dtw < 1e-12,
          fmt("dtw cost vs exhaustive path enumeration (lengths <= 6): max |diff| %.3g",
              worst_dtw));

  double worst_pca = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::MatrixXd data(24, 8);
    for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = rng.uniform(-1.0, 1.0);
    PcaResult pca = pca_project(data, 4);
    Eigen::MatrixXd centered = data.rowwise() - data.colwise().mean();
    Eigen::VectorXd oracle = jacobi_eig(centered.transpose() * centered / (data.rows() - 1.0));
    for (int k = 0; k < 4; ++k) {
      const double var = pca.projections.col(k).squaredNorm() / (data.rows() - 1.0);
      worst_pca = std::max(worst_pca, std::abs(var - oracle(k)));
    }
  }
  h.check(worst_pca < 1e-8,
          fmt("pca component variances vs independent Jacobi eigensolve: max |diff| %.3g",
              worst_pca));

  const double elapsed = now_s() - t_start;
  h.check(elapsed < 30.0, fmt("metric oracle runtime %.2f s (< 30 s)", elapsed));
}

// ---------------------------------------------------------------------------
// criterion 3: pipeline invariants
// ---------------------------------------------------------------------------

void criterion_pipeline(Harness& h) {
  const auto dir = work_dir() / "pipeline";
  std::filesystem::remove_all(dir);

  CohortSpec spec;
  spec.seed = 311;
  spec.per_archetype = {4, 4, 8, 0};
  spec.samples_min = 8;
  spec.samples_max = 9;
  spec.gap_violation_rate = 0.15;  // some long gaps, to exercise filtering
  GeneratedCohort gen = generate_cohort(spec, dir.string());
  Cohort cohort = load_manifest(gen.manifest_path, false).cohort;

  bool windows_ok = true;
  for (const auto& p : cohort.participants) {
    for (const auto& w : generate_windows(p)) {
      if (w.samples.size() != 5) windows_ok = false;
      for (int g : w.gaps())
        if (g < 1 || g > 14) windows_ok = false;
    }
  }
  h.check(windows_ok, "window generation: exactly 5 samples, all gaps in [1, 14]");

  bool involution_ok = true;
  for (const auto& p : cohort.participants) {
    for (const auto& w : generate_windows(p)) {
      SequenceWindow twice = time_inverse_augment(time_inverse_augment(w));
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        if (twice.samples[i].day != w.samples[i].day ||
            twice.samples[i].label != w.samples[i].label ||
            twice.samples[i].voice.path != w.samples[i].voice.path)
          involution_ok = false;
      }
    }
  }
  h.check(involution_ok, "time-inverse augmentation is an involution");

  DatasetSplit split = split_participants(cohort, {0.5, 0.25, 0.25}, 1);
  std::set<std::string> seen;
  bool disjoint = true;
  for (const auto* part : {&split.train, &split.validation, &split.test})
    for (const auto& id : *part)
      if (!seen.insert(id).second) disjoint = false;
  TrainConfig leak_cfg;
  leak_cfg.model = reduced_config();
  leak_cfg.features.patch_frames = 16;
  leak_cfg.features.mel.n_mels = 12;
  std::set<std::string> train_ids(split.train.begin(), split.train.end());
  bool no_leak = true;
  for (const auto& w : assemble_train_windows(cohort, split, leak_cfg))
    if (!train_ids.count(w.participant_id)) no_leak = false;
  h.check(disjoint && no_leak,
          "split partitions disjoint; augmented windows stay inside the train split");

  // 56-day lookback causality, bit level
  {
    const auto cdir = work_dir() / "causal";
    std::filesystem::remove_all(cdir);
    std::filesystem::create_directories(cdir);
    Participant p;
    p.id = "PX";
    for (int day : {0, 58, 60, 70}) {
      RecordingSample s;
      s.participant_id = p.id;
      s.day = day;
      s.label = TestLabel::negative;
      const std::string base = (cdir / ("d" + std::to_string(day))).string();
      write_wav(base + "_b.wav", synth_breath(0.3, static_cast<std::uint64_t>(day) * 7 + 1));
      write_wav(base + "_c.wav", synth_cough(0.3, static_cast<std::uint64_t>(day) * 7 + 2));
      write_wav(base + "_v.wav", synth_voice(0.3, static_cast<std::uint64_t>(day) * 7 + 3));
      s.breath.path = base + "_b.wav";
      s.cough.path = base + "_c.wav";
      s.voice.path = base + "_v.wav";
      p.samples.push_back(s);
    }
    ModelConfig mc = reduced_config();
    ModelParams params = init_params(mc, 5150);
    FeatureParams features;
    features.patch_frames = 16;
    features.mel.n_mels = 12;
    auto predict = [&]() {
      FeatureCache cache(features);
      for (const auto& s : p.samples) cache.add_sample(s);
      cache.build(1);
      return predict_day(p, 60, params, cache);
    };
    const double before = predict();
    write_wav((cdir / "d70_v.wav").string(), synth_voice(0.95, 99991));  // future sample
    const double after_future = predict();
    write_wav((cdir / "d0_c.wav").string(), synth_cough(0.95, 99992));  // beyond lookback
    const double after_stale = predict();
    h.check(before == after_future && before == after_stale,
            "lookback causality: future and beyond-56-day perturbations leave the "
            "prediction bit-unchanged");
  }

  // checkpoint round trip + full-run determinism
  {
    ModelConfig mc = reduced_config();
    ModelParams params = init_params(mc, 616);
    AdamState adam = make_adam_state(mc);
    const std::string ck = (work_dir() / "rt.ckpt").string();
    save_checkpoint(ck, params, adam);
    const std::string bytes1 = slurp(ck);
    SequentialCheckpoint loaded = load_checkpoint(ck);
    save_checkpoint(ck, loaded.params, loaded.adam);
    h.check(bytes1 == slurp(ck), "checkpoint save/load round trip is bit-exact");

    TrainConfig cfg;
    cfg.seed = 99;
    cfg.epochs = 2;
    cfg.batch_size = 16;
    cfg.threads = 2;
    cfg.split_ratios = {0.5, 0.25, 0.25};
    cfg.model = mc;
    cfg.features.patch_frames = 16;
    cfg.features.mel.n_mels = 12;
    DatasetSplit dsplit = split_participants(cohort, cfg.split_ratios, cfg.seed);
    TrainOutcome a = train_sequential(cohort, dsplit, cfg);
    TrainOutcome b = train_sequential(cohort, dsplit, cfg);
    const std::string ca = (work_dir() / "a.ckpt").string();
    const std::string cb = (work_dir() / "b.ckpt").string();
    save_checkpoint(ca, a.params, a.adam);
    save_checkpoint(cb, b.params, b.adam);
    h.check(slurp(ca) == slurp(cb),
            "full-run determinism: two trainings give identical checkpoint bytes");
  }
}

// ---------------------------------------------------------------------------
// criterion 4: end-to-end synthetic reproduction
// ---------------------------------------------------------------------------

void criterion_end_to_end(Harness& h) {
  const double t_start = now_s();
  const auto dir = work_dir() / "e2e";
  std::filesystem::remove_all(dir);

  CohortSpec spec;
  spec.seed = 20260810;
  spec.per_archetype = {30, 30, 30, 30};
  spec.samples_min = 8;
  spec.samples_max = 12;
  GeneratedCohort gen = generate_cohort(spec, dir.string());
  ManifestLoad load = load_manifest(gen.manifest_path, true);

  TrainConfig cfg;
  cfg.seed = 7;
  cfg.epochs = 8;
  cfg.batch_size = 16;
  cfg.patience = 4;
  cfg.threads = 0;  // all cores
  DatasetSplit split = split_participants(load.cohort, cfg.split_ratios, cfg.seed);
  TrainOutcome seq = train_sequential(load.cohort, split, cfg);

  TrainConfig bcfg = cfg;
  bcfg.epochs = 5;
  BaselineOutcome single = train_baseline(load.cohort, split, bcfg, ModelKind::baseline_single);
  BaselineOutcome average = train_baseline(load.cohort, split, bcfg, ModelKind::baseline_average);

  FeatureParams features;
  EvalInputs inputs{load.cohort,    split.test, seq.params, single.params,
                    average.params, features,   1000,       1801,
                    0};
  EvalReport rep = evaluate(inputs);

  h.check(rep.auroc_sequential >= 0.85,
          fmt("(a) sequential test AUROC %.4f >= 0.85 (CI %.3f-%.3f)", rep.auroc_sequential,
              rep.auroc_ci_lo, rep.auroc_ci_hi));
  const double margin_single = rep.auroc_sequential - rep.auroc_single;
  const double margin_average = rep.auroc_sequential - rep.auroc_average;
  h.check(margin_single >= 0.03 && margin_average >= 0.03,
          fmt("(b) AUROC margins: +%.4f over single, +%.4f over average (>= 0.03 each)",
              margin_single, margin_average));
  h.check(rep.p_vs_single < 0.05,
          fmt("(b) one-tailed z test sequential > single: p = %.5f (< 0.05)", rep.p_vs_single));

  // (c) recovery on the recovering archetype; the generator's acoustic lead
  // makes predictions cross before the labels do
  auto archetypes = read_archetypes_csv(gen.archetype_path);
  std::set<std::string> recovering;
  for (const auto& a : archetypes)
    if (a.archetype == Archetype::recovering) recovering.insert(a.id);
  std::vector<double> unaligned, aligned;
  for (const auto& traj : rep.trajectories) {
    if (!recovering.count(traj.participant_id)) continue;
    std::vector<double> probs, labels;
    std::vector<int> int_labels;
    for (const auto& pt : traj.points) {
      probs.push_back(pt.probability);
      labels.push_back(pt.label == TestLabel::positive ? 1.0 : 0.0);
      int_labels.push_back(pt.label == TestLabel::positive ? 1 : 0);
    }
    bool transition = false;
    for (std::size_t i = 1; i < int_labels.size(); ++i)
      if (int_labels[i] != int_labels[i - 1]) transition = true;
    if (!transition) continue;
    unaligned.push_back(point_biserial(probs, int_labels));
    aligned.push_back(dtw_align(probs, labels).aligned_point_biserial);
  }
  double mean_unaligned = 0.0, mean_aligned = 0.0;
  for (std::size_t i = 0; i < unaligned.size(); ++i) {
    mean_unaligned += unaligned[i];
    mean_aligned += aligned[i];
  }
  if (!unaligned.empty()) {
    mean_unaligned /= static_cast<double>(unaligned.size());
    mean_aligned /= static_cast<double>(unaligned.size());
  }
  h.check(!unaligned.empty() && mean_unaligned >= 0.6,
          fmt("(c) recovering-archetype mean unaligned gamma_pb %.4f >= 0.6 (n = %.0f)",
              mean_unaligned, static_cast<double>(unaligned.size())));
  h.check(!aligned.empty() && mean_aligned >= mean_unaligned,
          fmt("(c) DTW-aligned gamma_pb %.4f >= unaligned %.4f on the lead-time-shifted cohort",
              mean_aligned, mean_unaligned));

  const bool pos_fit_ok = rep.symptom_fit_positive && rep.symptom_fit_positive->r > 0.3;
  const bool neg_fit_ok = rep.symptom_fit_negative && std::abs(rep.symptom_fit_negative->r) < 0.2;
  h.check(pos_fit_ok, fmt("(d) symptom correlation for ever-positive participants r = %.4f "
                          "(> 0.3)",
                          rep.symptom_fit_positive ? rep.symptom_fit_positive->r : 0.0));
  h.check(neg_fit_ok, fmt("(d) symptom correlation for healthy participants |r| = %.4f (< 0.2)",
                          rep.symptom_fit_negative ? std::abs(rep.symptom_fit_negative->r) : 1.0));

  int nondecreasing = 0, adjacent = 0;
  auto count_curve = [&](const std::vector<SeqLengthBin>& bins) {
    for (std::size_t i = 1; i < bins.size(); ++i) {
      ++adjacent;
      if (bins[i].cumulative_accuracy >= bins[i - 1].cumulative_accuracy - 1e-12) ++nondecreasing;
    }
  };
  count_curve(rep.seq_length.by_samples);
  count_curve(rep.seq_length.by_days);
  h.check(adjacent > 0 && nondecreasing * 5 >= adjacent * 4,
          fmt("(e) sequence-length curve non-decreasing in %.0f of %.0f adjacent bins (>= 80%%)",
              static_cast<double>(nondecreasing), static_cast<double>(adjacent)));

  const double elapsed = now_s() - t_start;
  std::printf("  info  end-to-end runtime %.1f s (budget 600 s on a 4-core desktop)\n", elapsed);
}

// ---------------------------------------------------------------------------
// criterion 5: DSP checks
// ---------------------------------------------------------------------------

std::complex<double> dft_bin(const std::vector<double>& x, std::size_t k) {
  const double w = -2.0 * M_PI * static_cast<double>(k) / static_cast<double>(x.size());
  std::complex<double> step(std::cos(w), std::sin(w)), phasor(1.0, 0.0), acc(0.0, 0.0);
  for (double v : x) {
    acc += v * phasor;
    phasor *= step;
  }
  return acc;
}

void criterion_dsp(Harness& h) {
  // resample: 1 kHz tone from 48 kHz, peak within 1 bin / amplitude within 1%
  {
    AudioClip tone;
    tone.sample_rate = 48000;
    tone.samples.resize(48000);
    for (std::size_t i = 0; i < tone.samples.size(); ++i)
      tone.samples[i] = 0.8 * std::sin(2.0 * M_PI * 1000.0 * static_cast<double>(i) / 48000.0);
    AudioClip out = resample(tone, 16000);
    std::size_t peak = 900;
    double peak_mag = 0.0;
    for (std::size_t k = 900; k <= 1100; ++k) {
      const double m = std::abs(dft_bin(out.samples, k));
      if (m > peak_mag) {
        peak_mag = m;
        peak = k;
      }
    }
    const double amplitude = 2.0 * peak_mag / static_cast<double>(out.samples.size());
    h.check(std::llabs(static_cast<long>(peak) - 1000) <= 1 && std::abs(amplitude - 0.8) < 0.008,
            fmt("resample preserves a 1 kHz tone: peak bin %.0f, amplitude %.4f (target 0.8)",
                static_cast<double>(peak), amplitude));
  }

  // idempotence of normalize_peak and trim_silence
  {
    Rng rng(5511);
    bool ok = true;
    for (int trial = 0; trial < 10; ++trial) {
      AudioClip clip;
      clip.sample_rate = 16000;
      clip.samples.assign(rng.bounded(3000), 0.0);
      const std::size_t body = 4000 + rng.bounded(4000);
      for (std::size_t i = 0; i < body; ++i) clip.samples.push_back(rng.uniform(-0.6, 0.6));
      clip.samples.insert(clip.samples.end(), rng.bounded(3000), 0.0);
      AudioClip trimmed = trim_silence(clip);
      if (trim_silence(trimmed).samples != trimmed.samples) ok = false;
      AudioClip normalized = normalize_peak(trimmed);
      if (normalize_peak(normalized).samples != normalized.samples) ok = false;
    }
    h.check(ok, "trim_silence and normalize_peak are idempotent (bit-exact, 10 random clips)");
  }

  // log-mel frame-count formula on 20 random durations
  {
    MelParams mel;
    Rng rng(5522);
    bool ok = true;
    for (int trial = 0; trial < 20; ++trial) {
      const std::size_t n = 400 + rng.bounded(48000);
      AudioClip clip;
      clip.sample_rate = 16000;
      clip.samples.assign(n, 0.1);
      int expected = 0;
      for (std::size_t start = 0; start + 400 <= n; start += 160) ++expected;
      if (log_mel(clip, mel).n_frames() != expected) ok = false;
    }
    h.check(ok, "log-mel frame count matches direct enumeration on 20 random durations");
  }

  // synth_voice harmonic-to-noise monotonicity in s
  {
    auto hnr = [](const AudioClip& full) {
      AudioClip clip;
      clip.sample_rate = full.sample_rate;
      clip.samples.assign(full.samples.begin() + 8000, full.samples.begin() + 8000 + 8192);
      for (std::size_t i = 0; i < clip.samples.size(); ++i)
        clip.samples[i] *= 0.5 - 0.5 * std::cos(2.0 * M_PI * i / clip.samples.size());
      std::vector<double> mags(clip.samples.size() / 2 + 1);
      for (std::size_t k = 0; k < mags.size(); ++k) mags[k] = std::abs(dft_bin(clip.samples, k));
      const double bin_hz = 16000.0 / static_cast<double>(clip.samples.size());
      std::size_t f0 = static_cast<std::size_t>(100 / bin_hz);
      for (std::size_t k = f0; k <= static_cast<std::size_t>(250 / bin_hz); ++k)
        if (mags[k] > mags[f0]) f0 = k;
      double harm = 0.0, rest = 0.0;
      for (std::size_t k = 1; k < mags.size(); ++k) {
        bool near = false;
        for (int m = 1; m <= 8; ++m)
          if (std::llabs(static_cast<long>(k) - static_cast<long>(m * f0)) <= 3) near = true;
        (near ? harm : rest) += mags[k] * mags[k];
      }
      return 10.0 * std::log10(harm / rest);
    };
    const double h0 = hnr(synth_voice(0.0, 808));
    const double h5 = hnr(synth_voice(0.5, 808));
    const double h1 = hnr(synth_voice(1.0, 808));
    h.check(h0 > h5 && h5 > h1 && h0 - h1 >= 15.0,
            fmt("synth_voice HNR monotone in severity: %.1f > %.1f > %.1f dB", h0, h5, h1));
  }
}

}  // namespace

int main() {
  struct Entry {
    const char* name;
    std::function<void(Harness&)> run;
  };
  const std::vector<Entry> criteria = {
      {"1: gradient exactness (reduced model, reversal path included)", criterion_gradients},
      {"2: metric implementations vs independent oracles", criterion_metric_oracles},
      {"3: pipeline invariants", criterion_pipeline},
      {"4: end-to-end synthetic reproduction (120 participants)", criterion_end_to_end},
      {"5: DSP checks", criterion_dsp},
  };

  int failures = 0;
  for (const auto& entry : criteria) {
    std::printf("criterion %s\n", entry.name);
    std::fflush(stdout);
    Harness h;
    try {
      entry.run(h);
    } catch (const std::exception& e) {
      h.check(false, std::string("unexpected exception: ") + e.what());
    }
    std::printf("%s criterion %s\n\n", h.failures == 0 ? "PASS" : "FAIL", entry.name);
    std::fflush(stdout);
    failures += h.failures;
  }
  std::printf("%s: %d failing check(s)\n", failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL",
              failures);
  return failures == 0 ? 0 : 1;
}
