// SPDX-License-Identifier: Apache-2.0
#ifndef LONGTRACK_METRICS_HPP
#define LONGTRACK_METRICS_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "longtrack/common.hpp"

namespace longtrack {

struct ScoredSample {
  std::string participant_id;
  int day = 0;
  double score = 0.0;  // probability of positive, in [0, 1]
  int label = 0;       // 0/1
  int symptom_count = 0;
};

// AUROC as normalized Mann-Whitney U, ties credited 0.5. Computed from
// average ranks, which matches the pairwise comparison count exactly.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
  LT_REQUIRE(scores.size() == labels.size() && !scores.empty(), "auroc: size mismatch");
  std::size_t n_pos = 0, n_neg = 0;
  for (int l : labels) (l ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) fail(ErrorKind::SingleClass, "auroc: both classes required");

  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[idx[k]]) pos_rank_sum += avg_rank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace metric_detail {

inline std::vector<std::vector<std::size_t>> group_by_participant(
    const std::vector<ScoredSample>& samples, std::vector<std::string>* ids = nullptr) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < samples.size(); ++i)
    groups[samples[i].participant_id].push_back(i);
  std::vector<std::vector<std::size_t>> out;
  for (auto& [id, v] : groups) {
    if (ids) ids->push_back(id);
    out.push_back(std::move(v));
  }
  return out;
}

inline double percentile(std::vector<double> sorted, double q) {
  LT_REQUIRE(!sorted.empty(), "percentile: empty");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

inline double std_normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace metric_detail

// Percentile bootstrap CI for AUROC, resampling whole participants since
// labels correlate within a participant. Single-class resamples are skipped.
inline std::pair<double, double> bootstrap_ci(const std::vector<ScoredSample>& samples,
                                              int n_boot = 1000, double level = 0.95,
                                              std::uint64_t seed = 1) {
  LT_REQUIRE(n_boot >= 2 && level > 0.0 && level < 1.0, "bootstrap_ci: bad parameters");
  const auto groups = metric_detail::group_by_participant(samples);
  {
    bool pos_participant = false, neg_participant = false;
    int pos_count = 0, neg_count = 0;
    for (const auto& g : groups) {
      bool any_pos = false, any_neg = false;
      for (auto i : g) (samples[i].label ? any_pos : any_neg) = true;
      if (any_pos) ++pos_count;
      if (any_neg) ++neg_count;
      pos_participant |= any_pos;
      neg_participant |= any_neg;
    }
    if (!pos_participant || !neg_participant || pos_count < 2 || neg_count < 2)
      fail(ErrorKind::SingleClass, "bootstrap_ci: need two participants per class");
  }

  Rng rng(mix_seed(seed, 0xb007));
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n_boot));
  for (int b = 0; b < n_boot; ++b) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& grp = groups[rng.bounded(groups.size())];
      for (auto i : grp) {
        scores.push_back(samples[i].score);
        labels.push_back(samples[i].label);
      }
    }
    const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                      std::count(labels.begin(), labels.end(), 0) > 0;
    if (!both) continue;
    values.push_back(auroc(scores, labels));
  }
  if (values.size() < 2) fail(ErrorKind::SingleClass, "bootstrap_ci: too few valid resamples");
  std::sort(values.begin(), values.end());
  const double alpha = (1.0 - level) / 2.0;
  return {metric_detail::percentile(values, alpha), metric_detail::percentile(values, 1.0 - alpha)};
}

// Sensitivity and specificity at a fixed threshold; a score exactly at the
// threshold counts as a positive prediction.
inline std::pair<double, double> sens_spec(const std::vector<double>& scores,
                                           const std::vector<int>& labels,
                                           double threshold = 0.5) {
  LT_REQUIRE(scores.size() == labels.size() && !scores.empty(), "sens_spec: size mismatch");
  long tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred_pos = scores[i] >= threshold;
    if (labels[i])
      (pred_pos ? tp : fn) += 1;
    else
      (pred_pos ? fp : tn) += 1;
  }
  if (tp + fn == 0 || tn + fp == 0) fail(ErrorKind::SingleClass, "sens_spec: both classes required");
  return {static_cast<double>(tp) / static_cast<double>(tp + fn),
          static_cast<double>(tn) / static_cast<double>(tn + fp)};
}

// Point-biserial correlation: Pearson correlation between the probabilities
// and the 0/1-coded labels.
inline double point_biserial(const std::vector<double>& probs, const std::vector<int>& labels) {
  LT_REQUIRE(probs.size() == labels.size() && probs.size() >= 2, "point_biserial: size mismatch");
  const double n = static_cast<double>(probs.size());
  double mean_p = 0.0, mean_l = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    mean_p += probs[i];
    mean_l += labels[i];
  }
  mean_p /= n;
  mean_l /= n;
  double cov = 0.0, var_p = 0.0, var_l = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double dp = probs[i] - mean_p;
    const double dl = labels[i] - mean_l;
    cov += dp * dl;
    var_p += dp * dp;
    var_l += dl * dl;
  }
  if (var_p == 0.0 || var_l == 0.0)
    fail(ErrorKind::ConstantInput, "point_biserial: constant input");
  return cov / std::sqrt(var_p * var_l);
}

// Fraction of correctly thresholded predictions over a trajectory.
inline double participant_accuracy(const std::vector<double>& probs,
                                   const std::vector<int>& labels, double threshold = 0.5) {
  LT_REQUIRE(probs.size() == labels.size() && !probs.empty(), "participant_accuracy: empty");
  long correct = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if ((probs[i] >= threshold) == (labels[i] == 1)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

struct ProgressionScore {
  enum class Kind { point_biserial, accuracy } kind;
  double value;
};

// Dispatch per the label sequence: any positive/negative transition uses the
// point-biserial correlation; constant labels use accuracy. A trajectory with
// transitions but exactly constant probabilities scores 0 correlation.
inline ProgressionScore progression_score(const std::vector<double>& probs,
                                          const std::vector<int>& labels,
                                          double threshold = 0.5) {
  LT_REQUIRE(!probs.empty() && probs.size() == labels.size(), "progression_score: empty");
  bool transition = false;
  for (std::size_t i = 1; i < labels.size(); ++i)
    if (labels[i] != labels[i - 1]) transition = true;
  if (!transition)
    return {ProgressionScore::Kind::accuracy, participant_accuracy(probs, labels, threshold)};
  try {
    return {ProgressionScore::Kind::point_biserial, point_biserial(probs, labels)};
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::ConstantInput)
      return {ProgressionScore::Kind::point_biserial, 0.0};
    throw;
  }
}

struct DtwResult {
  std::vector<std::pair<int, int>> path;  // (prob index, label index), boundary to boundary
  double cost = 0.0;
  double aligned_point_biserial = 0.0;
};

// Classic DTW over |p_i - l_j| with unit steps {(1,0),(0,1),(1,1)} and a
// full-boundary path; the point-biserial correlation is recomputed over the
// path-matched pairs. Tie-breaking prefers diagonal, then the i-1 step.
inline DtwResult dtw_align(const std::vector<double>& probs, const std::vector<double>& labels) {
  const std::size_t n = probs.size(), m = labels.size();
  LT_REQUIRE(n >= 2 && m >= 2, "dtw_align: series must have length >= 2");
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::MatrixXd dp(n, m);
  auto cost = [&](std::size_t i, std::size_t j) { return std::abs(probs[i] - labels[j]); };
  dp(0, 0) = cost(0, 0);
  for (std::size_t i = 1; i < n; ++i) dp(i, 0) = dp(i - 1, 0) + cost(i, 0);
  for (std::size_t j = 1; j < m; ++j) dp(0, j) = dp(0, j - 1) + cost(0, j);
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 1; j < m; ++j)
      dp(i, j) = cost(i, j) + std::min({dp(i - 1, j - 1), dp(i - 1, j), dp(i, j - 1)});

  DtwResult out;
  out.cost = dp(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  out.path.emplace_back(static_cast<int>(i), static_cast<int>(j));
  while (i > 0 || j > 0) {
    if (i == 0) {
      --j;
    } else if (j == 0) {
      --i;
    } else {
      const double diag = dp(i - 1, j - 1), up = dp(i - 1, j), left = dp(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    }
    out.path.emplace_back(static_cast<int>(i), static_cast<int>(j));
  }
  std::reverse(out.path.begin(), out.path.end());

  std::vector<double> p_aligned;
  std::vector<int> l_aligned;
  for (const auto& [pi, lj] : out.path) {
    p_aligned.push_back(probs[static_cast<std::size_t>(pi)]);
    l_aligned.push_back(labels[static_cast<std::size_t>(lj)] >= 0.5 ? 1 : 0);
  }
  try {
    out.aligned_point_biserial = point_biserial(p_aligned, l_aligned);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::ConstantInput) throw;
    out.aligned_point_biserial = 0.0;  // correlation undefined on a constant side
  }
  return out;
}

struct PcaResult {
  Eigen::MatrixXd projections;   // n x k
  Eigen::MatrixXd components;    // k x d, rows are principal directions
  Eigen::VectorXd eigenvalues;   // all d, descending
  Eigen::VectorXd mean;          // d
  bool rank_deficient = false;
};

// Mean-centered projection onto the top-k covariance eigenvectors, components
// ordered by descending eigenvalue. Sign is fixed by making each component's
// largest-magnitude loading positive. Fewer than k nonzero eigenvalues pads
// the remaining components with zeros and flags the result.
inline PcaResult pca_project(const Eigen::MatrixXd& data, int k = 4) {
  const Eigen::Index n = data.rows(), d = data.cols();
  if (n < k + 1) fail(ErrorKind::RankDeficient, "pca_project: need at least k+1 vectors");
  PcaResult out;
  out.mean = data.colwise().mean();
  Eigen::MatrixXd centered = data.rowwise() - out.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  LT_REQUIRE(solver.info() == Eigen::Success, "pca_project: eigen solve failed");
  // ascending from Eigen; flip to descending
  out.eigenvalues = solver.eigenvalues().reverse();
  Eigen::MatrixXd vectors = solver.eigenvectors().rowwise().reverse();

  const double tol = 1e-12 * std::max(1.0, std::abs(out.eigenvalues(0)));
  int nonzero = 0;
  for (Eigen::Index i = 0; i < d; ++i)
    if (out.eigenvalues(i) > tol) ++nonzero;
  out.rank_deficient = nonzero < k;

  out.components = Eigen::MatrixXd::Zero(k, d);
  for (int c = 0; c < std::min<int>(k, nonzero); ++c) {
    Eigen::VectorXd v = vectors.col(c);
    Eigen::Index max_idx;
    v.cwiseAbs().maxCoeff(&max_idx);
    if (v(max_idx) < 0.0) v = -v;
    out.components.row(c) = v.transpose();
  }
  out.projections = centered * out.components.transpose();
  return out;
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r = 0.0;
  std::size_t n_used = 0;
};

// Least-squares line of probability vs symptom count, excluding samples with
// more than `exclude_above` symptoms.
inline LineFit symptom_correlation(const std::vector<ScoredSample>& samples,
                                   int exclude_above = 5) {
  std::vector<double> x, y;
  for (const auto& s : samples) {
    if (s.symptom_count > exclude_above) continue;
    x.push_back(static_cast<double>(s.symptom_count));
    y.push_back(s.score);
  }
  if (x.size() < 2) fail(ErrorKind::ConstantInput, "symptom_correlation: too few samples");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) fail(ErrorKind::ConstantInput, "symptom_correlation: constant symptom counts");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r = syy == 0.0 ? 0.0 : sxy / std::sqrt(sxx * syy);
  fit.n_used = x.size();
  return fit;
}

enum class Trend { increasing, non_increasing };

struct SampleDayInfo {
  int day = 0;
  int label = 0;  // 0/1
  bool symptoms_reported = false;
};

// Trend of the predicted probability in the 7-day window anchored at the
// first day of reported symptoms, or at the first positive test if no
// symptoms were reported on or before it.
inline Trend seven_day_trend(const std::vector<std::pair<int, double>>& predictions,
                             const std::vector<SampleDayInfo>& sample_days) {
  int first_symptom = std::numeric_limits<int>::max();
  int first_positive = std::numeric_limits<int>::max();
  for (const auto& s : sample_days) {
    if (s.symptoms_reported) first_symptom = std::min(first_symptom, s.day);
    if (s.label == 1) first_positive = std::min(first_positive, s.day);
  }
  int anchor;
  if (first_symptom != std::numeric_limits<int>::max() && first_symptom <= first_positive)
    anchor = first_symptom;
  else if (first_positive != std::numeric_limits<int>::max())
    anchor = first_positive;
  else
    fail(ErrorKind::WindowEmpty, "seven_day_trend: no symptom or positive-test anchor");

  std::vector<double> xs, ys;
  for (const auto& [day, prob] : predictions) {
    if (day >= anchor && day <= anchor + 7) {
      xs.push_back(static_cast<double>(day));
      ys.push_back(prob);
    }
  }
  if (xs.size() < 2) fail(ErrorKind::WindowEmpty, "seven_day_trend: fewer than 2 predictions in window");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  const double slope = sxx == 0.0 ? 0.0 : sxy / sxx;
  return slope > 0.0 ? Trend::increasing : Trend::non_increasing;
}

// One-tailed paired-bootstrap z test of AUROC(A) > AUROC(B); both systems must
// have scored the identical sample set.
inline double auroc_z_test(const std::vector<ScoredSample>& a, const std::vector<ScoredSample>& b,
                           int n_boot = 1000, std::uint64_t seed = 1) {
  LT_REQUIRE(a.size() == b.size() && !a.empty(), "auroc_z_test: size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i)
    LT_REQUIRE(a[i].participant_id == b[i].participant_id && a[i].day == b[i].day &&
                   a[i].label == b[i].label,
               "auroc_z_test: systems scored different samples");

  const auto groups = metric_detail::group_by_participant(a);
  Rng rng(mix_seed(seed, 0x27e5));
  std::vector<double> deltas;
  deltas.reserve(static_cast<std::size_t>(n_boot));
  for (int boot = 0; boot < n_boot; ++boot) {
    std::vector<double> sa, sb;
    std::vector<int> labels;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      const auto& grp = groups[rng.bounded(groups.size())];
      for (auto i : grp) {
        sa.push_back(a[i].score);
        sb.push_back(b[i].score);
        labels.push_back(a[i].label);
      }
    }
    const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                      std::count(labels.begin(), labels.end(), 0) > 0;
    if (!both) continue;
    deltas.push_back(auroc(sa, labels) - auroc(sb, labels));
  }
  if (deltas.size() < 2) fail(ErrorKind::SingleClass, "auroc_z_test: too few valid resamples");

  const double n = static_cast<double>(deltas.size());
  const double mean = std::accumulate(deltas.begin(), deltas.end(), 0.0) / n;
  double var = 0.0;
  for (double d : deltas) var += (d - mean) * (d - mean);
  var /= (n - 1.0);
  const double sd = std::sqrt(var);
  if (sd == 0.0) return mean > 0.0 ? 0.0 : (mean < 0.0 ? 1.0 : 0.5);
  return 1.0 - metric_detail::std_normal_cdf(mean / sd);
}

struct DepthScoredSample {
  double score = 0.0;
  int label = 0;
  int past_samples = 0;   // history samples before the predicted day
  int history_days = 0;   // predicted day minus first in-window history day
};

struct SeqLengthBin {
  int threshold = 0;      // depth <= threshold
  std::size_t bin_support = 0;
  double cumulative_accuracy = 0.0;
};

struct SeqLengthCurve {
  std::vector<SeqLengthBin> by_samples;   // one bin per observed past-sample count
  std::vector<SeqLengthBin> by_days;      // 4-day buckets over observed history spans
};

// Cumulative accuracy as a function of available history. Only observed bins
// are reported.
inline SeqLengthCurve seq_length_analysis(const std::vector<DepthScoredSample>& samples,
                                          double threshold = 0.5, int day_bucket = 4) {
  SeqLengthCurve out;
  auto build = [&](auto depth_of, std::vector<SeqLengthBin>& bins, int granularity) {
    std::map<int, std::pair<std::size_t, std::size_t>> per_depth;  // depth -> (correct, count)
    for (const auto& s : samples) {
      int d = depth_of(s);
      if (granularity > 1) d = ((d + granularity - 1) / granularity) * granularity;
      auto& [correct, count] = per_depth[d];
      count += 1;
      if ((s.score >= threshold) == (s.label == 1)) correct += 1;
    }
    std::size_t cum_correct = 0, cum_count = 0;
    for (const auto& [depth, cc] : per_depth) {
      cum_correct += cc.first;
      cum_count += cc.second;
      bins.push_back({depth, cc.second,
                      static_cast<double>(cum_correct) / static_cast<double>(cum_count)});
    }
  };
  build([](const DepthScoredSample& s) { return s.past_samples; }, out.by_samples, 1);
  build([](const DepthScoredSample& s) { return s.history_days; }, out.by_days, day_bucket);
  return out;
}

}  // namespace longtrack

#endif  // LONGTRACK_METRICS_HPP
