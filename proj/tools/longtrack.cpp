// SPDX-License-Identifier: Apache-2.0
//
// longtrack command-line tool: synth | preprocess | train | eval | trajectory
// | plot | report. Exit codes: 0 success, 2 usage error, 3 data error, 4
// internal invariant failure.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "longtrack/checkpoint.hpp"
#include "longtrack/config.hpp"
#include "longtrack/evaluation.hpp"
#include "longtrack/svg.hpp"
#include "longtrack/synth.hpp"
#include "longtrack/training.hpp"

namespace fs = std::filesystem;
using namespace longtrack;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitInternal = 4;

CohortSpec parse_cohort_spec(const std::string& path) {
  KeyValueConfig cfg = KeyValueConfig::from_file(path);
  CohortSpec spec;
  spec.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long>(spec.seed)));
  spec.per_archetype[0] = static_cast<int>(cfg.get_int("n_recovering", spec.per_archetype[0]));
  spec.per_archetype[1] = static_cast<int>(cfg.get_int("n_persistent", spec.per_archetype[1]));
  spec.per_archetype[2] = static_cast<int>(cfg.get_int("n_healthy", spec.per_archetype[2]));
  spec.per_archetype[3] = static_cast<int>(cfg.get_int("n_late_onset", spec.per_archetype[3]));
  spec.samples_min = static_cast<int>(cfg.get_int("samples_min", spec.samples_min));
  spec.samples_max = static_cast<int>(cfg.get_int("samples_max", spec.samples_max));
  spec.sample_rate = static_cast<int>(cfg.get_int("sample_rate", spec.sample_rate));
  spec.gap_violation_rate = cfg.get_double("gap_violation_rate", spec.gap_violation_rate);
  spec.acoustic_offset_min = cfg.get_double("acoustic_offset_min", spec.acoustic_offset_min);
  spec.acoustic_offset_max = cfg.get_double("acoustic_offset_max", spec.acoustic_offset_max);
  spec.acoustic_gain_min = cfg.get_double("acoustic_gain_min", spec.acoustic_gain_min);
  spec.acoustic_gain_max = cfg.get_double("acoustic_gain_max", spec.acoustic_gain_max);
  spec.acoustic_lead_max_days =
      static_cast<int>(cfg.get_int("acoustic_lead_max_days", spec.acoustic_lead_max_days));
  cfg.reject_unknown();
  if (spec.samples_min < 1 || spec.samples_max < spec.samples_min)
    fail(ErrorKind::ConfigError, "bad samples_min/samples_max");
  return spec;
}

struct TrainFileConfig {
  TrainConfig train;
  int baseline_epochs = 0;  // 0 = same as epochs
};

TrainFileConfig parse_train_config(const std::string& path) {
  KeyValueConfig cfg = KeyValueConfig::from_file(path);
  TrainFileConfig out;
  TrainConfig& t = out.train;
  t.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long>(t.seed)));
  t.epochs = static_cast<int>(cfg.get_int("epochs", t.epochs));
  t.batch_size = static_cast<int>(cfg.get_int("batch_size", t.batch_size));
  t.lr = cfg.get_double("lr", t.lr);
  t.patience = static_cast<int>(cfg.get_int("patience", t.patience));
  t.threads = static_cast<int>(cfg.get_int("threads", t.threads));
  t.aug_time_inverse = cfg.get_bool("aug_time_inverse", t.aug_time_inverse);
  t.aug_oversample = cfg.get_bool("aug_oversample", t.aug_oversample);
  t.aug_perturb_online = cfg.get_bool("aug_perturb_online", t.aug_perturb_online);
  t.perturb_gain_db_min = cfg.get_double("perturb_gain_db_min", t.perturb_gain_db_min);
  t.perturb_gain_db_max = cfg.get_double("perturb_gain_db_max", t.perturb_gain_db_max);
  t.perturb_noise_snr_db = cfg.get_double("perturb_noise_snr_db", t.perturb_noise_snr_db);
  t.split_ratios[0] = cfg.get_double("train_ratio", t.split_ratios[0]);
  t.split_ratios[1] = cfg.get_double("validation_ratio", t.split_ratios[1]);
  t.split_ratios[2] = cfg.get_double("test_ratio", t.split_ratios[2]);
  t.model.embed_dim = static_cast<int>(cfg.get_int("embed_dim", t.model.embed_dim));
  t.model.hidden_dim = static_cast<int>(cfg.get_int("hidden_dim", t.model.hidden_dim));
  t.model.conv1_channels = static_cast<int>(cfg.get_int("conv1_channels", t.model.conv1_channels));
  t.model.conv2_channels = static_cast<int>(cfg.get_int("conv2_channels", t.model.conv2_channels));
  t.model.lambda_rev = cfg.get_double("lambda_rev", t.model.lambda_rev);
  t.model.w_lang = cfg.get_double("w_lang", t.model.w_lang);
  t.model.patch_frames = static_cast<int>(cfg.get_int("patch_frames", t.model.patch_frames));
  t.model.n_mels = static_cast<int>(cfg.get_int("n_mels", t.model.n_mels));
  t.features.patch_frames = t.model.patch_frames;
  t.features.mel.n_mels = t.model.n_mels;
  out.baseline_epochs = static_cast<int>(cfg.get_int("baseline_epochs", 0));
  cfg.reject_unknown();
  return out;
}

int cmd_synth(const std::string& spec_path, const std::string& out_dir) {
  const CohortSpec spec = parse_cohort_spec(spec_path);
  const GeneratedCohort result = generate_cohort(spec, out_dir);
  std::cout << "wrote " << result.n_rows << " participant-days for "
            << spec.total_participants() << " participants under " << out_dir << "\n";
  return 0;
}

int cmd_preprocess(const std::string& manifest_path, const std::string& out_dir) {
  ManifestLoad load = load_manifest(manifest_path, /*check_quality=*/true);
  fs::create_directories(fs::path(out_dir) / "wavs");
  std::ofstream manifest(fs::path(out_dir) / "manifest.csv", std::ios::trunc);
  if (!manifest) fail(ErrorKind::IoFailure, "cannot write manifest in " + out_dir);
  manifest << kManifestHeader << "\n";

  FeatureParams params;
  std::size_t rows = 0;
  for (const auto& p : load.cohort.participants) {
    for (const auto& s : p.samples) {
      auto process = [&](const ModalityClip& clip, const char* modality) {
        const AudioClip cleaned = normalize_peak(preprocess_clip(load_wav(clip.path), params));
        char name[64];
        std::snprintf(name, sizeof(name), "wavs/%s_d%03d_%s.wav", p.id.c_str(), s.day, modality);
        write_wav((fs::path(out_dir) / name).string(), cleaned);
        return std::string(name);
      };
      const std::string b = process(s.breath, "breath");
      const std::string c = process(s.cough, "cough");
      const std::string v = process(s.voice, "voice");
      manifest << p.id << ',' << s.day << ',' << b << ',' << c << ',' << v << ','
               << to_string(s.label) << ',' << s.symptom_count << ',' << to_string(p.language)
               << ',' << to_string(p.gender) << ',' << to_string(p.age_band) << "\n";
      ++rows;
    }
  }
  write_drop_log((fs::path(out_dir) / "drops.log").string(), load.dropped);
  std::cout << "preprocessed " << rows << " rows (" << load.dropped.size()
            << " dropped) into " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& config_path,
              const std::string& out_dir) {
  const TrainFileConfig cfg = parse_train_config(config_path);
  ManifestLoad load = load_manifest(manifest_path, /*check_quality=*/true);
  fs::create_directories(out_dir);
  write_drop_log((fs::path(out_dir) / "drops.log").string(), load.dropped);

  const DatasetSplit split =
      split_participants(load.cohort, cfg.train.split_ratios, cfg.train.seed);
  write_split_csv((fs::path(out_dir) / "split.csv").string(), split);

  TrainOutcome seq = train_sequential(load.cohort, split, cfg.train);
  save_checkpoint((fs::path(out_dir) / "model.ckpt").string(), seq.params, seq.adam);
  write_train_report_csv((fs::path(out_dir) / "train_report.csv").string(), seq.report);
  std::cout << "sequential: best epoch " << seq.report.best_epoch << ", validation AUROC "
            << seq.report.best_val_auroc << "\n";

  TrainConfig base_cfg = cfg.train;
  if (cfg.baseline_epochs > 0) base_cfg.epochs = cfg.baseline_epochs;
  BaselineOutcome single =
      train_baseline(load.cohort, split, base_cfg, ModelKind::baseline_single);
  save_checkpoint((fs::path(out_dir) / "baseline_single.ckpt").string(), single.params,
                  single.adam);
  write_train_report_csv((fs::path(out_dir) / "train_report_single.csv").string(), single.report);
  std::cout << "single baseline: best epoch " << single.report.best_epoch
            << ", validation AUROC " << single.report.best_val_auroc << "\n";

  BaselineOutcome average =
      train_baseline(load.cohort, split, base_cfg, ModelKind::baseline_average);
  save_checkpoint((fs::path(out_dir) / "baseline_average.ckpt").string(), average.params,
                  average.adam);
  write_train_report_csv((fs::path(out_dir) / "train_report_average.csv").string(),
                         average.report);
  std::cout << "average baseline: best epoch " << average.report.best_epoch
            << ", validation AUROC " << average.report.best_val_auroc << "\n";
  return 0;
}

int cmd_eval(const std::string& manifest_path, const std::string& checkpoint_path,
             const std::string& out_dir, std::string split_path, std::string single_path,
             std::string average_path, int n_boot, std::uint64_t seed, int threads) {
  const fs::path ckpt_dir = fs::path(checkpoint_path).parent_path();
  if (split_path.empty()) split_path = (ckpt_dir / "split.csv").string();
  if (single_path.empty()) single_path = (ckpt_dir / "baseline_single.ckpt").string();
  if (average_path.empty()) average_path = (ckpt_dir / "baseline_average.ckpt").string();

  ManifestLoad load = load_manifest(manifest_path, /*check_quality=*/true);
  const DatasetSplit split = read_split_csv(split_path);
  SequentialCheckpoint seq = load_checkpoint(checkpoint_path);
  BaselineCheckpoint single = load_baseline_checkpoint(single_path);
  BaselineCheckpoint average = load_baseline_checkpoint(average_path);
  if (single.params.kind != ModelKind::baseline_single ||
      average.params.kind != ModelKind::baseline_average)
    fail(ErrorKind::CorruptCheckpoint, "baseline checkpoints have unexpected kinds");

  FeatureParams features;
  features.patch_frames = seq.params.config.patch_frames;
  features.mel.n_mels = seq.params.config.n_mels;

  EvalInputs inputs{load.cohort,          split.test, seq.params,
                    single.params,        average.params, features,
                    n_boot,               seed,       threads};
  EvalReport report = evaluate(inputs);
  write_eval_artifacts(out_dir, report);
  std::cout << "sequential AUROC " << report.auroc_sequential << " (" << report.auroc_ci_lo
            << "-" << report.auroc_ci_hi << "), single " << report.auroc_single << ", average "
            << report.auroc_average << "\n"
            << "artifacts in " << out_dir << "\n";
  return 0;
}

int cmd_trajectory(const std::string& manifest_path, const std::string& checkpoint_path,
                   const std::string& participant_id, const std::string& out_dir) {
  ManifestLoad load = load_manifest(manifest_path, /*check_quality=*/true);
  const Participant* participant = load.cohort.find(participant_id);
  if (!participant)
    fail(ErrorKind::ManifestParse, "participant not in manifest: " + participant_id);
  SequentialCheckpoint seq = load_checkpoint(checkpoint_path);

  FeatureParams features;
  features.patch_frames = seq.params.config.patch_frames;
  features.mel.n_mels = seq.params.config.n_mels;
  FeatureCache cache(features);
  for (const auto& s : participant->samples) cache.add_sample(s);
  cache.build(0);

  const Trajectory traj = predict_trajectory(*participant, seq.params, cache);
  fs::create_directories(out_dir);
  const std::string out_path =
      (fs::path(out_dir) / ("trajectory_" + participant_id + ".csv")).string();
  write_trajectory_csv(out_path, traj);
  std::cout << "wrote " << traj.points.size() << " predictions ("
            << traj.skipped_days.size() << " days skipped for lookback) to " << out_path << "\n";
  return 0;
}

int cmd_plot(const std::string& trajectory_csv, const std::string& out_svg) {
  const Trajectory traj = read_trajectory_csv(trajectory_csv);
  write_trajectory_svg(out_svg, traj);
  std::cout << "wrote " << out_svg << "\n";
  return 0;
}

int cmd_report(const std::string& eval_dir, const std::string& out_path) {
  auto append_file = [](std::ofstream& out, const fs::path& path, const char* heading) {
    std::ifstream in(path);
    if (!in) return;
    out << "== " << heading << " ==\n";
    out << in.rdbuf() << "\n";
  };
  std::ofstream out(out_path, std::ios::trunc);
  if (!out) fail(ErrorKind::IoFailure, "cannot write " + out_path);
  const fs::path dir(eval_dir);
  if (!fs::exists(dir / "summary.txt"))
    fail(ErrorKind::IoFailure, "no eval artifacts under " + eval_dir);
  append_file(out, dir / "summary.txt", "summary");
  append_file(out, dir / "metrics.csv", "metrics");
  append_file(out, dir / "progression.csv", "disease progression per participant");
  append_file(out, dir / "recovery.csv", "recovery trajectories");
  append_file(out, dir / "seq_length.csv", "sequence-length analysis");
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"longitudinal audio-biomarker toolkit"};
  app.require_subcommand(1);

  std::string spec_path, manifest, config, out, checkpoint, split, participant;
  std::string baseline_single_path, baseline_average_path, trajectory_csv, eval_dir;
  int n_boot = 1000, threads = 0;
  std::uint64_t seed = 1;

  auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
  synth->add_option("--spec", spec_path, "cohort spec (key=value)")->required();
  synth->add_option("--out", out, "output directory")->required();

  auto* preprocess = app.add_subcommand("preprocess", "preprocess a cohort manifest");
  preprocess->add_option("--manifest", manifest, "cohort manifest CSV")->required();
  preprocess->add_option("--out", out, "output directory")->required();

  auto* train = app.add_subcommand("train", "train the sequential model and both baselines");
  train->add_option("--manifest", manifest, "cohort manifest CSV")->required();
  train->add_option("--config", config, "training config (key=value)")->required();
  train->add_option("--out", out, "output directory")->required();

  auto* eval = app.add_subcommand("eval", "evaluate checkpoints on the test partition");
  eval->add_option("--manifest", manifest, "cohort manifest CSV")->required();
  eval->add_option("--checkpoint", checkpoint, "sequential checkpoint")->required();
  eval->add_option("--out", out, "output directory")->required();
  eval->add_option("--split", split, "split.csv (default: next to the checkpoint)");
  eval->add_option("--baseline-single", baseline_single_path, "single-baseline checkpoint");
  eval->add_option("--baseline-average", baseline_average_path, "average-baseline checkpoint");
  eval->add_option("--n-boot", n_boot, "bootstrap resamples");
  eval->add_option("--seed", seed, "bootstrap seed");
  eval->add_option("--threads", threads, "worker threads (0 = auto)");

  auto* trajectory = app.add_subcommand("trajectory", "predict one participant's trajectory");
  trajectory->add_option("--manifest", manifest, "cohort manifest CSV")->required();
  trajectory->add_option("--checkpoint", checkpoint, "sequential checkpoint")->required();
  trajectory->add_option("--participant", participant, "participant id")->required();
  trajectory->add_option("--out", out, "output directory")->required();

  auto* plot = app.add_subcommand("plot", "render a trajectory CSV as SVG");
  plot->add_option("--trajectory-csv", trajectory_csv, "trajectory CSV")->required();
  plot->add_option("--out", out, "output SVG path")->required();

  auto* report = app.add_subcommand("report", "merge eval artifacts into one text report");
  report->add_option("--eval-dir", eval_dir, "directory written by eval")->required();
  report->add_option("--out", out, "output text path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(spec_path, out);
    if (preprocess->parsed()) return cmd_preprocess(manifest, out);
    if (train->parsed()) return cmd_train(manifest, config, out);
    if (eval->parsed())
      return cmd_eval(manifest, checkpoint, out, split, baseline_single_path,
                      baseline_average_path, n_boot, seed, threads);
    if (trajectory->parsed()) return cmd_trajectory(manifest, checkpoint, participant, out);
    if (plot->parsed()) return cmd_plot(trajectory_csv, out);
    if (report->parsed()) return cmd_report(eval_dir, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::Internal ? kExitInternal : kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
