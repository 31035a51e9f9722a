// SPDX-License-Identifier: Apache-2.0
//
// Test-cohort evaluation: per-day trajectories from the sequential model and
// both non-sequential benchmarks on the identical participant-days, detection
// metrics with participant-level bootstrap, progression/recovery scoring with
// DTW alignment, latent-space PCA, symptom correlation, 7-day trends, and the
// sequence-length analysis.
#ifndef LONGTRACK_EVALUATION_HPP
#define LONGTRACK_EVALUATION_HPP

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "longtrack/baseline.hpp"
#include "longtrack/cohort.hpp"
#include "longtrack/features.hpp"
#include "longtrack/metrics.hpp"
#include "longtrack/model.hpp"
#include "longtrack/trajectory.hpp"

namespace longtrack {

struct ParticipantProgression {
  std::string participant_id;
  bool ever_positive = false;
  ProgressionScore score{ProgressionScore::Kind::accuracy, 0.0};
};

struct RecoveryRow {
  std::string participant_id;
  double unaligned_pb = 0.0;
  double aligned_pb = 0.0;
  double dtw_cost = 0.0;
};

struct LatentRow {
  std::string participant_id;
  int day = 0;
  int label = 0;
  Eigen::VectorXd projection;  // k components
};

struct EvalReport {
  // detection
  double auroc_sequential = 0.0, auroc_ci_lo = 0.0, auroc_ci_hi = 0.0;
  double sensitivity = 0.0, specificity = 0.0;
  double auroc_single = 0.0, auroc_average = 0.0;
  double p_vs_single = 1.0, p_vs_average = 1.0;
  std::vector<ScoredSample> scored_sequential, scored_single, scored_average;

  // progression
  std::vector<ParticipantProgression> progression;
  double progression_cohort_mean = 0.0;
  double progression_positive_mean = 0.0;
  double progression_negative_mean = 0.0;

  // recovery
  std::vector<RecoveryRow> recovery;
  double recovery_unaligned_mean = 0.0;
  double recovery_aligned_mean = 0.0;

  // latent space
  std::vector<LatentRow> latents;
  Eigen::VectorXd pca_eigenvalues;
  bool pca_rank_deficient = false;

  // statistical analysis
  std::optional<LineFit> symptom_fit_positive, symptom_fit_negative;
  int trend_increasing = 0, trend_eligible = 0;

  SeqLengthCurve seq_length;
  std::vector<Trajectory> trajectories;
};

struct EvalInputs {
  const Cohort& cohort;
  std::vector<std::string> test_ids;
  const ModelParams& sequential;
  const BaselineParams& single;
  const BaselineParams& average;
  FeatureParams features;
  int n_boot = 1000;
  std::uint64_t seed = 1;
  int threads = 0;
};

inline EvalReport evaluate(const EvalInputs& in) {
  EvalReport report;
  std::vector<const Participant*> participants;
  for (const auto& id : in.test_ids) {
    const Participant* p = in.cohort.find(id);
    if (!p) fail(ErrorKind::ManifestParse, "evaluate: unknown test participant " + id);
    if (p->samples.size() >= 2) participants.push_back(p);
  }
  if (participants.empty()) fail(ErrorKind::EmptyPartition, "evaluate: no test participants");

  FeatureCache cache(in.features);
  for (const Participant* p : participants)
    for (const auto& s : p->samples) cache.add_sample(s);
  cache.build(in.threads);

  SequentialScorer seq(in.sequential, cache);
  BaselineScorer single(in.single, cache);
  BaselineScorer average(in.average, cache);

  std::vector<DepthScoredSample> depth_samples;
  for (const Participant* p : participants) {
    Trajectory traj = seq.predict_trajectory(*p);
    for (const auto& pt : traj.points) {
      ScoredSample row;
      row.participant_id = p->id;
      row.day = pt.day;
      row.label = pt.label == TestLabel::positive ? 1 : 0;
      row.score = pt.probability;
      for (const auto& s : p->samples)
        if (s.day == pt.day) row.symptom_count = s.symptom_count;
      report.scored_sequential.push_back(row);

      row.score = single.predict_day(*p, pt.day);
      report.scored_single.push_back(row);
      row.score = average.predict_day(*p, pt.day);
      report.scored_average.push_back(row);

      const auto hist = seq.history(*p, pt.day);
      DepthScoredSample ds;
      ds.score = pt.probability;
      ds.label = report.scored_sequential.back().label;
      ds.past_samples = static_cast<int>(hist.size()) - 1;
      ds.history_days = pt.day - hist.front()->day;
      depth_samples.push_back(ds);
    }
    report.trajectories.push_back(std::move(traj));
  }
  if (report.scored_sequential.empty())
    fail(ErrorKind::EmptyPartition, "evaluate: no evaluable days in the test cohort");

  // --- detection ---
  std::vector<double> s_seq, s_single, s_avg;
  std::vector<int> labels;
  for (std::size_t i = 0; i < report.scored_sequential.size(); ++i) {
    s_seq.push_back(report.scored_sequential[i].score);
    s_single.push_back(report.scored_single[i].score);
    s_avg.push_back(report.scored_average[i].score);
    labels.push_back(report.scored_sequential[i].label);
  }
  report.auroc_sequential = auroc(s_seq, labels);
  report.auroc_single = auroc(s_single, labels);
  report.auroc_average = auroc(s_avg, labels);
  std::tie(report.auroc_ci_lo, report.auroc_ci_hi) =
      bootstrap_ci(report.scored_sequential, in.n_boot, 0.95, in.seed);
  std::tie(report.sensitivity, report.specificity) = sens_spec(s_seq, labels);
  report.p_vs_single =
      auroc_z_test(report.scored_sequential, report.scored_single, in.n_boot, in.seed);
  report.p_vs_average =
      auroc_z_test(report.scored_sequential, report.scored_average, in.n_boot, in.seed);

  // --- progression + recovery ---
  double sum_all = 0.0, sum_pos = 0.0, sum_neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (const auto& traj : report.trajectories) {
    if (traj.points.empty()) continue;
    std::vector<double> probs;
    std::vector<int> plabels;
    for (const auto& pt : traj.points) {
      probs.push_back(pt.probability);
      plabels.push_back(pt.label == TestLabel::positive ? 1 : 0);
    }
    ParticipantProgression row;
    row.participant_id = traj.participant_id;
    row.ever_positive = std::count(plabels.begin(), plabels.end(), 1) > 0;
    row.score = progression_score(probs, plabels);
    report.progression.push_back(row);
    sum_all += row.score.value;
    if (row.ever_positive) {
      sum_pos += row.score.value;
      ++n_pos;
    } else {
      sum_neg += row.score.value;
      ++n_neg;
    }

    // recovery: tested positive at some point and negative at the end
    if (row.ever_positive && plabels.back() == 0) {
      bool transition = false;
      for (std::size_t i = 1; i < plabels.size(); ++i)
        if (plabels[i] != plabels[i - 1]) transition = true;
      if (transition) {
        RecoveryRow rec;
        rec.participant_id = traj.participant_id;
        try {
          rec.unaligned_pb = point_biserial(probs, plabels);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::ConstantInput) throw;
          rec.unaligned_pb = 0.0;
        }
        std::vector<double> label_series(plabels.begin(), plabels.end());
        try {
          DtwResult dtw = dtw_align(probs, label_series);
          rec.aligned_pb = dtw.aligned_point_biserial;
          rec.dtw_cost = dtw.cost;
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::ConstantInput) throw;
          rec.aligned_pb = rec.unaligned_pb;
        }
        report.recovery.push_back(rec);
      }
    }
  }
  const std::size_t n_all = report.progression.size();
  report.progression_cohort_mean = n_all ? sum_all / static_cast<double>(n_all) : 0.0;
  report.progression_positive_mean = n_pos ? sum_pos / static_cast<double>(n_pos) : 0.0;
  report.progression_negative_mean = n_neg ? sum_neg / static_cast<double>(n_neg) : 0.0;
  if (!report.recovery.empty()) {
    double su = 0.0, sa = 0.0;
    for (const auto& r : report.recovery) {
      su += r.unaligned_pb;
      sa += r.aligned_pb;
    }
    report.recovery_unaligned_mean = su / static_cast<double>(report.recovery.size());
    report.recovery_aligned_mean = sa / static_cast<double>(report.recovery.size());
  }

  // --- latent space ---
  {
    std::vector<LatentRow> rows;
    std::vector<Eigen::VectorXd> latents;
    for (const Participant* p : participants) {
      for (auto& [day, h] : seq.extract_latents(*p)) {
        LatentRow row;
        row.participant_id = p->id;
        row.day = day;
        for (const auto& s : p->samples)
          if (s.day == day) row.label = s.label == TestLabel::positive ? 1 : 0;
        rows.push_back(std::move(row));
        latents.push_back(h);
      }
    }
    if (static_cast<int>(latents.size()) >= 5) {
      Eigen::MatrixXd data(static_cast<Eigen::Index>(latents.size()), latents.front().size());
      for (std::size_t i = 0; i < latents.size(); ++i)
        data.row(static_cast<Eigen::Index>(i)) = latents[i].transpose();
      PcaResult pca = pca_project(data, 4);
      report.pca_eigenvalues = pca.eigenvalues;
      report.pca_rank_deficient = pca.rank_deficient;
      for (std::size_t i = 0; i < rows.size(); ++i)
        rows[i].projection = pca.projections.row(static_cast<Eigen::Index>(i)).transpose();
      report.latents = std::move(rows);
    }
  }

  // --- symptom correlation, per class ---
  {
    std::vector<ScoredSample> pos_samples, neg_samples;
    for (const Participant* p : participants) {
      const bool pos = p->ever_positive();
      for (const auto& row : report.scored_sequential)
        if (row.participant_id == p->id) (pos ? pos_samples : neg_samples).push_back(row);
    }
    try {
      report.symptom_fit_positive = symptom_correlation(pos_samples);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ConstantInput) throw;
    }
    try {
      report.symptom_fit_negative = symptom_correlation(neg_samples);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ConstantInput) throw;
    }
  }

  // --- 7-day trend over ever-positive participants ---
  for (const Participant* p : participants) {
    if (!p->ever_positive()) continue;
    std::vector<std::pair<int, double>> predictions;
    for (const auto& row : report.scored_sequential)
      if (row.participant_id == p->id) predictions.emplace_back(row.day, row.score);
    std::vector<SampleDayInfo> days;
    for (const auto& s : p->samples)
      days.push_back({s.day, s.label == TestLabel::positive ? 1 : 0, s.symptoms_reported});
    try {
      ++report.trend_eligible;
      if (seven_day_trend(predictions, days) == Trend::increasing) ++report.trend_increasing;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::WindowEmpty) throw;
      --report.trend_eligible;
    }
  }

  report.seq_length = seq_length_analysis(depth_samples);
  return report;
}

// ---------------------------------------------------------------------------
// Report writers
// ---------------------------------------------------------------------------

namespace eval_detail {

inline std::string fmt(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace eval_detail

inline void write_eval_artifacts(const std::string& out_dir, const EvalReport& r) {
  namespace fs = std::filesystem;
  using eval_detail::fmt;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::IoFailure, "cannot create " + out_dir);
  auto open = [&](const char* name) {
    std::ofstream out(fs::path(out_dir) / name, std::ios::trunc);
    if (!out) fail(ErrorKind::IoFailure, std::string("cannot write ") + name);
    return out;
  };

  {
    auto out = open("metrics.csv");
    out << "metric,value\n";
    out << "auroc_sequential," << fmt(r.auroc_sequential) << "\n";
    out << "auroc_ci_lo," << fmt(r.auroc_ci_lo) << "\n";
    out << "auroc_ci_hi," << fmt(r.auroc_ci_hi) << "\n";
    out << "sensitivity," << fmt(r.sensitivity) << "\n";
    out << "specificity," << fmt(r.specificity) << "\n";
    out << "auroc_single," << fmt(r.auroc_single) << "\n";
    out << "auroc_average," << fmt(r.auroc_average) << "\n";
    out << "p_one_tailed_vs_single," << fmt(r.p_vs_single) << "\n";
    out << "p_one_tailed_vs_average," << fmt(r.p_vs_average) << "\n";
    out << "progression_cohort_mean," << fmt(r.progression_cohort_mean) << "\n";
    out << "progression_positive_mean," << fmt(r.progression_positive_mean) << "\n";
    out << "progression_negative_mean," << fmt(r.progression_negative_mean) << "\n";
    out << "recovery_participants," << r.recovery.size() << "\n";
    out << "recovery_pb_unaligned," << fmt(r.recovery_unaligned_mean) << "\n";
    out << "recovery_pb_dtw_aligned," << fmt(r.recovery_aligned_mean) << "\n";
    if (r.symptom_fit_positive) {
      out << "symptom_slope_positive," << fmt(r.symptom_fit_positive->slope) << "\n";
      out << "symptom_r_positive," << fmt(r.symptom_fit_positive->r) << "\n";
    }
    if (r.symptom_fit_negative) {
      out << "symptom_slope_negative," << fmt(r.symptom_fit_negative->slope) << "\n";
      out << "symptom_r_negative," << fmt(r.symptom_fit_negative->r) << "\n";
    }
    out << "trend_increasing," << r.trend_increasing << "\n";
    out << "trend_eligible," << r.trend_eligible << "\n";
  }

  {
    auto out = open("trajectories.csv");
    out << "participant_id,day,probability,predicted_class,label\n";
    for (const auto& t : r.trajectories)
      for (const auto& pt : t.points)
        out << t.participant_id << ',' << pt.day << ',' << fmt(pt.probability, 9) << ','
            << (pt.predicted_positive ? "positive" : "negative") << ',' << to_string(pt.label)
            << "\n";
  }

  {
    auto out = open("scores_by_system.csv");
    out << "participant_id,day,label,score_sequential,score_single,score_average\n";
    for (std::size_t i = 0; i < r.scored_sequential.size(); ++i)
      out << r.scored_sequential[i].participant_id << ',' << r.scored_sequential[i].day << ','
          << r.scored_sequential[i].label << ',' << fmt(r.scored_sequential[i].score, 9) << ','
          << fmt(r.scored_single[i].score, 9) << ',' << fmt(r.scored_average[i].score, 9) << "\n";
  }

  {
    auto out = open("progression.csv");
    out << "participant_id,ever_positive,metric,value\n";
    for (const auto& p : r.progression)
      out << p.participant_id << ',' << (p.ever_positive ? 1 : 0) << ','
          << (p.score.kind == ProgressionScore::Kind::point_biserial ? "gamma_pb" : "gamma") << ','
          << fmt(p.score.value) << "\n";
  }

  {
    auto out = open("recovery.csv");
    out << "participant_id,pb_unaligned,pb_dtw_aligned,dtw_cost\n";
    for (const auto& rec : r.recovery)
      out << rec.participant_id << ',' << fmt(rec.unaligned_pb) << ',' << fmt(rec.aligned_pb)
          << ',' << fmt(rec.dtw_cost) << "\n";
  }

  {
    auto out = open("pca_projections.csv");
    out << "participant_id,day,label,pc1,pc2,pc3,pc4\n";
    for (const auto& row : r.latents) {
      out << row.participant_id << ',' << row.day << ',' << row.label;
      for (Eigen::Index k = 0; k < row.projection.size(); ++k)
        out << ',' << fmt(row.projection(k));
      out << "\n";
    }
  }

  {
    auto out = open("seq_length.csv");
    out << "axis,threshold,bin_support,cumulative_accuracy\n";
    for (const auto& b : r.seq_length.by_samples)
      out << "past_samples," << b.threshold << ',' << b.bin_support << ','
          << fmt(b.cumulative_accuracy) << "\n";
    for (const auto& b : r.seq_length.by_days)
      out << "history_days," << b.threshold << ',' << b.bin_support << ','
          << fmt(b.cumulative_accuracy) << "\n";
  }

  {
    auto out = open("summary.txt");
    out << "COVID-19 detection (test cohort, all evaluable days)\n";
    out << "  sequential AUROC " << fmt(r.auroc_sequential, 3) << " (" << fmt(r.auroc_ci_lo, 3)
        << "-" << fmt(r.auroc_ci_hi, 3) << "), sensitivity " << fmt(r.sensitivity, 3)
        << ", specificity " << fmt(r.specificity, 3) << "\n";
    out << "  benchmarks: single " << fmt(r.auroc_single, 3) << ", average "
        << fmt(r.auroc_average, 3) << "\n";
    out << "  one-tailed p (sequential > single) " << fmt(r.p_vs_single, 4)
        << ", (sequential > average) " << fmt(r.p_vs_average, 4) << "\n\n";
    out << "Disease progression\n";
    out << "  cohort mean gamma_pb/gamma " << fmt(r.progression_cohort_mean, 3)
        << " (positive " << fmt(r.progression_positive_mean, 3) << ", negative "
        << fmt(r.progression_negative_mean, 3) << ")\n\n";
    out << "Recovery trajectory (" << r.recovery.size() << " participants)\n";
    out << "  gamma_pb " << fmt(r.recovery_unaligned_mean, 3) << " unaligned, "
        << fmt(r.recovery_aligned_mean, 3) << " DTW-aligned\n\n";
    out << "Latent space\n";
    if (r.pca_eigenvalues.size() > 0) {
      out << "  top-4 eigenvalues:";
      for (int i = 0; i < 4 && i < r.pca_eigenvalues.size(); ++i)
        out << ' ' << fmt(r.pca_eigenvalues(i), 4);
      out << (r.pca_rank_deficient ? " (rank deficient)" : "") << "\n\n";
    } else {
      out << "  too few latent vectors for PCA\n\n";
    }
    out << "Symptom correlation (samples with <= 5 symptoms)\n";
    if (r.symptom_fit_positive)
      out << "  ever-positive: slope " << fmt(r.symptom_fit_positive->slope, 4) << ", r "
          << fmt(r.symptom_fit_positive->r, 3) << "\n";
    if (r.symptom_fit_negative)
      out << "  never-positive: slope " << fmt(r.symptom_fit_negative->slope, 4) << ", r "
          << fmt(r.symptom_fit_negative->r, 3) << "\n";
    out << "\nFirst 7 days from onset: " << r.trend_increasing << " of " << r.trend_eligible
        << " participants show an increasing predicted trend\n";
  }
}

}  // namespace longtrack

#endif  // LONGTRACK_EVALUATION_HPP
