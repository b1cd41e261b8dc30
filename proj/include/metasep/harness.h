// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef METASEP_HARNESS_H_
#define METASEP_HARNESS_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "metasep/metalearn.h"
#include "metasep/taskgen.h"
#include "metasep/tasnet.h"

namespace metasep::harness {

enum class Algo { kMultitask, kMaml, kAnilS, kAnilC };
const char* algo_name(Algo a);
Algo algo_from_name(const std::string& name);
// Which parameter group the inner loop updates during meta-training.
tasnet::Partition algo_partition(Algo a);

// Test-time adaptation regimes: whole model, separator only, or
// encoder/decoder only.
enum class Regime { kM, kAS, kAC };
const char* regime_name(Regime r);
Regime regime_from_name(const std::string& name);
tasnet::Partition regime_partition(Regime r);

struct ExperimentConfig {
  tasnet::ModelConfig model;

  // Relative manifest paths resolve against data_root, which itself falls
  // back to the METASEP_DATA_ROOT environment variable.
  std::string data_root;
  std::string train_manifest = "train.jsonl";
  std::string eval_manifest = "test_clean.jsonl";
  std::string out_dir = "run";
  std::string init_checkpoint;
  std::string method_label;  // row label in reports; defaults per mode

  int pretrain_epochs = 8;
  int pretrain_batch = 8;
  double pretrain_lr = 1e-3;
  bool use_adam = true;
  // Fraction of the run after which the mid-training snapshot is taken.
  double half_fraction = 0.5;

  Algo algo = Algo::kMaml;
  int meta_epochs = 6;
  meta::MetaConfig meta;

  Regime regime = Regime::kM;
  double adapt_alpha = 0.01;
  int adapt_steps = 1;

  unsigned threads = 0;  // 0 picks the hardware concurrency
  std::uint64_t seed = 17;
};

std::string resolve_data_root(const std::string& configured);
// Absolute paths pass through; relative ones attach to the resolved root.
std::string resolve_manifest(const std::string& configured,
                             const std::string& manifest);

struct PretrainResult {
  std::string best_checkpoint;
  std::string half_checkpoint;
  std::string loss_csv;
  double initial_dev_loss = 0.0;
  double best_dev_loss = 0.0;
  int best_epoch = 0;
  std::vector<double> train_epoch_loss;
};

PretrainResult run_pretrain(const ExperimentConfig& cfg);

struct MetaTrainResult {
  std::string best_checkpoint;
  std::string loss_csv;
  double initial_dev_loss = 0.0;  // mean per-task meta loss before training
  double best_dev_loss = 0.0;
  int best_epoch = 0;
};

MetaTrainResult run_meta_train(const ExperimentConfig& cfg);

struct TaskScore {
  std::string task_id;
  double pre = 0.0;   // mean query SI-SNRi before adaptation, dB
  double post = 0.0;  // same after one-shot adaptation
};

struct AdaptationReport {
  std::string checkpoint;
  std::string manifest;
  std::string method_label;
  Regime regime = Regime::kM;
  double alpha = 0.0;
  int steps = 1;
  std::vector<TaskScore> tasks;
  double pre_mean = 0.0;
  double post_mean = 0.0;
  double pre_std = 0.0;
  double post_std = 0.0;
  double delta_mean = 0.0;
  std::string csv_path;
  std::string json_path;
};

AdaptationReport run_adapt_eval(const ExperimentConfig& cfg);

// The standard adaptation-rate grid for sweeps.
std::vector<double> default_alpha_grid();

struct SweepRow {
  Regime regime = Regime::kM;
  double alpha = 0.0;
  double pre_mean = 0.0;
  double post_mean = 0.0;
  double post_std = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // regime-major, alpha order as given
  SweepRow best;               // highest post-adaptation mean
  std::string csv_path;
};

SweepResult run_lr_sweep(const ExperimentConfig& cfg,
                         std::vector<double> alphas = default_alpha_grid());

// Cross-run result table. Rows are (method, adaptation) pairs; columns are
// evaluation sets; cells are mean SI-SNRi in dB.
struct ReportRow {
  std::string method;
  std::string adaptation;  // regime tag, or "-" when none applies
  std::map<std::string, double> values;
};

struct ReportTable {
  std::vector<std::string> columns;
  std::vector<ReportRow> rows;
};

ReportTable build_report(const std::vector<std::string>& summary_json_paths);
std::string emit_report_text(const ReportTable& table);
std::string emit_report_csv(const ReportTable& table);
std::string emit_report_json(const ReportTable& table);
// Inverse of emit_report_text; cell values carry two decimals.
ReportTable parse_report_table(const std::string& text);

}  // namespace metasep::harness

#endif  // METASEP_HARNESS_H_
