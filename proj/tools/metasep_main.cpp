// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "metasep/error.h"
#include "metasep/harness.h"
#include "metasep/taskgen.h"

namespace fs = std::filesystem;
using namespace metasep;

namespace {

struct ModelOpts {
  std::string preset = "desk";
  std::int64_t encoder_channels = -1;
  std::int64_t kernel_len = -1;
  std::int64_t stride = -1;
  std::int64_t bottleneck = -1;
  std::int64_t hidden = -1;
  std::int64_t depthwise = -1;
  std::int64_t blocks = -1;
  std::int64_t repeats = -1;

  tasnet::ModelConfig resolve() const {
    tasnet::ModelConfig cfg;
    if (preset == "desk") {
      cfg = tasnet::ModelConfig::desk_default();
    } else if (preset == "tiny") {
      cfg = tasnet::ModelConfig::tiny();
    } else if (preset == "full") {
      cfg = tasnet::ModelConfig::desk_default();
      cfg.encoder_channels = 512;
      cfg.bottleneck_channels = 128;
      cfg.hidden_channels = 512;
      cfg.blocks_per_repeat = 8;
      cfg.repeats = 3;
    } else {
      fail("unknown model preset \"", preset, "\", expected desk | tiny | full");
    }
    if (encoder_channels > 0) cfg.encoder_channels = encoder_channels;
    if (kernel_len > 0) cfg.kernel_len = kernel_len;
    if (stride > 0) cfg.stride = stride;
    if (bottleneck > 0) cfg.bottleneck_channels = bottleneck;
    if (hidden > 0) cfg.hidden_channels = hidden;
    if (depthwise > 0) cfg.depthwise_kernel = depthwise;
    if (blocks > 0) cfg.blocks_per_repeat = blocks;
    if (repeats > 0) cfg.repeats = repeats;
    cfg.validate();
    return cfg;
  }
};

void add_model_opts(CLI::App* cmd, ModelOpts* m) {
  cmd->add_option("--preset", m->preset, "Model size preset: desk | tiny | full");
  cmd->add_option("--encoder-channels", m->encoder_channels, "Encoder basis size");
  cmd->add_option("--kernel-len", m->kernel_len, "Encoder window, samples");
  cmd->add_option("--stride", m->stride, "Encoder hop, samples");
  cmd->add_option("--bottleneck", m->bottleneck, "Bottleneck channels");
  cmd->add_option("--hidden", m->hidden, "Block hidden channels");
  cmd->add_option("--depthwise", m->depthwise, "Depthwise kernel size");
  cmd->add_option("--blocks", m->blocks, "Blocks per repeat");
  cmd->add_option("--repeats", m->repeats, "Repeat count");
}

void add_common_opts(CLI::App* cmd, harness::ExperimentConfig* cfg) {
  cmd->add_option("--data", cfg->data_root,
                  "Data root (default: $METASEP_DATA_ROOT, else .)");
  cmd->add_option("--out", cfg->out_dir, "Output directory");
  cmd->add_option("--seed", cfg->seed, "Run seed");
  cmd->add_option("--threads", cfg->threads,
                  "Worker threads (0 = hardware concurrency)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-learned speech separation workbench"};
  app.require_subcommand(1);

  // make-tasks -------------------------------------------------------------
  auto* make_cmd = app.add_subcommand(
      "make-tasks", "Synthesize speakers and write task manifests");
  taskgen::GenConfig gen;
  std::string gen_out;
  bool no_noisy = false;
  make_cmd->add_option("--out", gen_out, "Dataset directory")->required();
  make_cmd->add_option("--train-speakers", gen.train_speakers,
                       "Speakers in the training pool");
  make_cmd->add_option("--test-speakers", gen.test_speakers,
                       "Speakers held out for testing");
  make_cmd->add_option("--utterance-s", gen.utterance_s,
                       "Utterance length, seconds");
  make_cmd->add_option("--dev-fraction", gen.dev_fraction,
                       "Fraction of training tasks held out as dev");
  make_cmd->add_option("--seed", gen.seed, "Generation seed");
  make_cmd->add_flag("--no-noisy", no_noisy, "Skip the noisy test manifest");
  make_cmd->callback([&]() {
    gen.noisy_test_variant = !no_noisy;
    taskgen::GenResult r = taskgen::generate_dataset(gen, gen_out);
    std::printf("train tasks: %d (+%d dev) -> %s\n", r.train_tasks, r.dev_tasks,
                r.train_manifest.c_str());
    std::printf("test tasks: %d -> %s\n", r.test_tasks,
                r.test_clean_manifest.c_str());
    if (!r.test_noisy_manifest.empty()) {
      std::printf("noisy variant -> %s\n", r.test_noisy_manifest.c_str());
    }
  });

  // pretrain ---------------------------------------------------------------
  auto* pre_cmd = app.add_subcommand(
      "pretrain", "Supervised multitask training over pooled mixtures");
  harness::ExperimentConfig pre_cfg;
  ModelOpts pre_model;
  bool pre_sgd = false;
  add_common_opts(pre_cmd, &pre_cfg);
  add_model_opts(pre_cmd, &pre_model);
  pre_cmd->add_option("--train", pre_cfg.train_manifest, "Training manifest");
  pre_cmd->add_option("--epochs", pre_cfg.pretrain_epochs, "Training epochs");
  pre_cmd->add_option("--batch", pre_cfg.pretrain_batch, "Minibatch size");
  pre_cmd->add_option("--lr", pre_cfg.pretrain_lr, "Learning rate");
  pre_cmd->add_option("--init", pre_cfg.init_checkpoint,
                      "Checkpoint to continue from");
  pre_cmd->add_option("--half-fraction", pre_cfg.half_fraction,
                      "When to take the mid-training snapshot");
  pre_cmd->add_flag("--sgd", pre_sgd, "Plain gradient descent instead of Adam");
  pre_cmd->callback([&]() {
    pre_cfg.model = pre_model.resolve();
    pre_cfg.use_adam = !pre_sgd;
    harness::PretrainResult r = harness::run_pretrain(pre_cfg);
    std::printf("dev loss: %.4f -> %.4f (best at epoch %d)\n",
                r.initial_dev_loss, r.best_dev_loss, r.best_epoch);
    std::printf("best checkpoint: %s\n", r.best_checkpoint.c_str());
    std::printf("half checkpoint: %s\n", r.half_checkpoint.c_str());
  });

  // meta-train ---------------------------------------------------------------
  auto* meta_cmd = app.add_subcommand(
      "meta-train", "Episodic training with inner-loop adaptation");
  harness::ExperimentConfig meta_cfg;
  ModelOpts meta_model;
  std::string algo = "maml";
  bool fd_exact = false;
  add_common_opts(meta_cmd, &meta_cfg);
  add_model_opts(meta_cmd, &meta_model);
  meta_cmd->add_option("--algo", algo, "maml | anil_s | anil_c")->required();
  meta_cmd->add_option("--train", meta_cfg.train_manifest, "Training manifest");
  meta_cmd->add_option("--epochs", meta_cfg.meta_epochs, "Meta epochs");
  meta_cmd->add_option("--alpha", meta_cfg.meta.alpha, "Inner-loop rate");
  meta_cmd->add_option("--beta", meta_cfg.meta.beta, "Outer-loop rate");
  meta_cmd->add_option("--meta-batch", meta_cfg.meta.batch_size,
                       "Tasks per meta update");
  meta_cmd->add_option("--inner-steps", meta_cfg.meta.inner_steps,
                       "Inner-loop steps");
  meta_cmd->add_option("--init", meta_cfg.init_checkpoint,
                       "Checkpoint to start from");
  meta_cmd->add_flag("--fd-exact", fd_exact,
                     "Exact meta-gradients by finite differences (tiny "
                     "models only)");
  meta_cmd->callback([&]() {
    meta_cfg.model = meta_model.resolve();
    meta_cfg.algo = harness::algo_from_name(algo);
    meta_cfg.meta.meta_grad_mode = fd_exact
                                       ? meta::MetaGradMode::kFiniteDifferenceExact
                                       : meta::MetaGradMode::kFirstOrder;
    harness::MetaTrainResult r = harness::run_meta_train(meta_cfg);
    std::printf("dev meta loss: %.4f -> %.4f (best at epoch %d)\n",
                r.initial_dev_loss, r.best_dev_loss, r.best_epoch);
    std::printf("best checkpoint: %s\n", r.best_checkpoint.c_str());
  });

  // adapt-eval ---------------------------------------------------------------
  auto* adapt_cmd = app.add_subcommand(
      "adapt-eval", "One-shot adaptation and SI-SNRi scoring per task");
  harness::ExperimentConfig adapt_cfg;
  std::string regime;
  add_common_opts(adapt_cmd, &adapt_cfg);
  adapt_cmd->add_option("--ckpt", adapt_cfg.init_checkpoint, "Model checkpoint")
      ->required();
  adapt_cmd->add_option("--regime", regime, "m | a_s | a_c")->required();
  adapt_cmd->add_option("--alpha", adapt_cfg.adapt_alpha, "Adaptation rate");
  adapt_cmd->add_option("--steps", adapt_cfg.adapt_steps, "Adaptation steps");
  adapt_cmd->add_option("--eval", adapt_cfg.eval_manifest,
                        "Evaluation manifest");
  adapt_cmd->add_option("--label", adapt_cfg.method_label,
                        "Method label for reports");
  adapt_cmd->callback([&]() {
    adapt_cfg.regime = harness::regime_from_name(regime);
    harness::AdaptationReport r = harness::run_adapt_eval(adapt_cfg);
    std::printf("tasks: %zu\n", r.tasks.size());
    std::printf("SI-SNRi pre:  %.2f dB (std %.2f)\n", r.pre_mean, r.pre_std);
    std::printf("SI-SNRi post: %.2f dB (std %.2f, delta %+.2f)\n", r.post_mean,
                r.post_std, r.delta_mean);
    std::printf("summary: %s\n", r.json_path.c_str());
  });

  // sweep-lr -----------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand(
      "sweep-lr", "Adaptation-rate sweep across all three regimes");
  harness::ExperimentConfig sweep_cfg;
  std::vector<double> alphas;
  add_common_opts(sweep_cmd, &sweep_cfg);
  sweep_cmd->add_option("--ckpt", sweep_cfg.init_checkpoint, "Model checkpoint")
      ->required();
  sweep_cmd->add_option("--eval", sweep_cfg.eval_manifest,
                        "Evaluation manifest");
  sweep_cmd->add_option("--steps", sweep_cfg.adapt_steps, "Adaptation steps");
  sweep_cmd->add_option("--alphas", alphas,
                        "Adaptation rates (default: the standard grid)");
  sweep_cmd->callback([&]() {
    harness::SweepResult r =
        alphas.empty() ? harness::run_lr_sweep(sweep_cfg)
                       : harness::run_lr_sweep(sweep_cfg, alphas);
    for (const harness::SweepRow& row : r.rows) {
      std::printf("%-4s alpha=%-8g post %.2f dB (std %.2f)\n",
                  harness::regime_name(row.regime), row.alpha, row.post_mean,
                  row.post_std);
    }
    std::printf("best: regime=%s alpha=%g post %.2f dB\n",
                harness::regime_name(r.best.regime), r.best.alpha,
                r.best.post_mean);
    std::printf("table: %s\n", r.csv_path.c_str());
  });

  // report -------------------------------------------------------------------
  auto* report_cmd = app.add_subcommand(
      "report", "Merge adapt-eval summaries into one result table");
  std::vector<std::string> report_in;
  std::string report_out = "report";
  report_cmd->add_option("--in", report_in, "adapt-eval summary JSON files")
      ->required();
  report_cmd->add_option("--out", report_out, "Output directory");
  report_cmd->callback([&]() {
    harness::ReportTable table = harness::build_report(report_in);
    const std::string text = harness::emit_report_text(table);
    fs::create_directories(report_out);
    auto write = [&](const char* name, const std::string& content) {
      std::ofstream os(fs::path(report_out) / name);
      MS_CHECK(os.is_open(), "cannot write report file ", name);
      os << content;
    };
    write("report.txt", text);
    write("report.csv", harness::emit_report_csv(table));
    write("report.json", harness::emit_report_json(table));
    std::printf("%s", text.c_str());
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
