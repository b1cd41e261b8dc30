// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metasep/harness.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "metasep/error.h"
#include "metasep/objective.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace metasep::harness {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + salt * 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Runs fn(0..n-1) on a small worker pool. The first exception, if any, is
// rethrown on the calling thread after all workers finish.
void parallel_for(std::size_t n, unsigned threads,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  unsigned workers = threads != 0 ? threads : std::thread::hardware_concurrency();
  if (workers == 0) workers = 1;
  workers = static_cast<unsigned>(
      std::min<std::size_t>(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

double mean_of(const std::vector<double>& xs) {
  MS_CHECK(!xs.empty(), "mean of an empty sequence");
  return std::accumulate(xs.begin(), xs.end(), 0.0) /
         static_cast<double>(xs.size());
}

double std_of(const std::vector<double>& xs, double mean) {
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size()));
}

std::string format_fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
  return buf;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path);
  MS_CHECK(os.is_open(), "cannot open for writing: ", path);
  os << content;
  MS_CHECK(os.good(), "write failed: ", path);
}

std::vector<meta::Task> load_tasks(
    const std::vector<taskgen::ManifestTask>& recs, const std::string& root,
    unsigned threads) {
  std::vector<meta::Task> tasks(recs.size());
  parallel_for(recs.size(), threads, [&](std::size_t i) {
    tasks[i] = taskgen::load_task(recs[i], root);
  });
  return tasks;
}

// Mean over query mixtures of the mean per-source SI-SNR improvement, with
// sources aligned by the best permutation.
double mean_query_sisnri(const tasnet::ModelParams& params,
                         const meta::Task& task) {
  MS_CHECK(!task.query.empty(), "task \"", task.id, "\" has no query set");
  double total = 0.0;
  for (const meta::Example& ex : task.query) {
    std::vector<AudioSignal> est = tasnet::separate_signal(params, ex.mixture);
    objective::LossValue lv = objective::upit_loss_value(est, ex.references);
    double acc = 0.0;
    for (std::size_t i = 0; i < est.size(); ++i) {
      const auto j = static_cast<std::size_t>(lv.permutation[i]);
      acc += objective::si_snri(est[i], ex.references[j], ex.mixture);
    }
    total += acc / static_cast<double>(est.size());
  }
  return total / static_cast<double>(task.query.size());
}

json model_to_json(const tasnet::ModelConfig& m) {
  return json{{"num_sources", m.num_sources},
              {"encoder_channels", m.encoder_channels},
              {"kernel_len", m.kernel_len},
              {"stride", m.stride},
              {"bottleneck_channels", m.bottleneck_channels},
              {"hidden_channels", m.hidden_channels},
              {"depthwise_kernel", m.depthwise_kernel},
              {"blocks_per_repeat", m.blocks_per_repeat},
              {"repeats", m.repeats},
              {"sample_rate", m.sample_rate}};
}

json config_to_json(const ExperimentConfig& cfg) {
  return json{
      {"model", model_to_json(cfg.model)},
      {"data_root", cfg.data_root},
      {"train_manifest", cfg.train_manifest},
      {"eval_manifest", cfg.eval_manifest},
      {"out_dir", cfg.out_dir},
      {"init_checkpoint", cfg.init_checkpoint},
      {"method_label", cfg.method_label},
      {"pretrain",
       {{"epochs", cfg.pretrain_epochs},
        {"batch", cfg.pretrain_batch},
        {"lr", cfg.pretrain_lr},
        {"adam", cfg.use_adam},
        {"half_fraction", cfg.half_fraction}}},
      {"meta",
       {{"algo", algo_name(cfg.algo)},
        {"epochs", cfg.meta_epochs},
        {"alpha", cfg.meta.alpha},
        {"beta", cfg.meta.beta},
        {"batch_size", cfg.meta.batch_size},
        {"inner_steps", cfg.meta.inner_steps},
        {"partition", tasnet::partition_name(cfg.meta.partition)},
        {"grad_mode", meta::meta_grad_mode_name(cfg.meta.meta_grad_mode)}}},
      {"adapt",
       {{"regime", regime_name(cfg.regime)},
        {"alpha", cfg.adapt_alpha},
        {"steps", cfg.adapt_steps}}},
      {"threads", cfg.threads},
      {"seed", cfg.seed}};
}

std::string default_method_label(const ExperimentConfig& cfg) {
  if (!cfg.method_label.empty()) return cfg.method_label;
  if (!cfg.init_checkpoint.empty()) {
    return fs::path(cfg.init_checkpoint).stem().string();
  }
  return "run";
}

struct EvalContext {
  tasnet::ModelParams params;
  std::vector<meta::Task> tasks;
  std::string manifest_path;
};

EvalContext load_eval_context(const ExperimentConfig& cfg) {
  MS_CHECK(!cfg.init_checkpoint.empty(),
           "adaptation evaluation needs a model checkpoint");
  EvalContext ctx;
  ctx.params = tasnet::load_checkpoint(cfg.init_checkpoint);
  ctx.manifest_path = resolve_manifest(cfg.data_root, cfg.eval_manifest);
  auto recs = taskgen::read_manifest(ctx.manifest_path);
  ctx.tasks = load_tasks(recs, fs::path(ctx.manifest_path).parent_path().string(),
                         cfg.threads);
  return ctx;
}

struct ComboScores {
  std::vector<double> pre;
  std::vector<double> post;
};

// Scores one (regime, alpha) setting over all tasks. pre_cache, when given,
// supplies the adaptation-independent pre scores.
ComboScores score_tasks(const EvalContext& ctx, tasnet::Partition partition,
                        double alpha, int steps, unsigned threads,
                        const std::vector<double>* pre_cache) {
  meta::MetaConfig mcfg;
  mcfg.alpha = alpha;
  mcfg.inner_steps = steps;
  mcfg.partition = partition;
  const meta::LossBuilder loss = meta::separation_loss();

  ComboScores scores;
  scores.pre.resize(ctx.tasks.size());
  scores.post.resize(ctx.tasks.size());
  parallel_for(ctx.tasks.size(), threads, [&](std::size_t i) {
    const meta::Task& task = ctx.tasks[i];
    scores.pre[i] =
        pre_cache != nullptr ? (*pre_cache)[i] : mean_query_sisnri(ctx.params, task);
    tasnet::ModelParams adapted =
        meta::finetune(ctx.params, task.support, mcfg, loss);
    scores.post[i] = mean_query_sisnri(adapted, task);
  });
  return scores;
}

}  // namespace

const char* algo_name(Algo a) {
  switch (a) {
    case Algo::kMultitask:
      return "multitask";
    case Algo::kMaml:
      return "maml";
    case Algo::kAnilS:
      return "anil_s";
    case Algo::kAnilC:
      return "anil_c";
  }
  fail("unknown algorithm value");
}

Algo algo_from_name(const std::string& name) {
  if (name == "multitask") return Algo::kMultitask;
  if (name == "maml") return Algo::kMaml;
  if (name == "anil_s") return Algo::kAnilS;
  if (name == "anil_c") return Algo::kAnilC;
  fail("unknown algorithm \"", name,
       "\", expected multitask | maml | anil_s | anil_c");
}

tasnet::Partition algo_partition(Algo a) {
  switch (a) {
    case Algo::kMultitask:
    case Algo::kMaml:
      return tasnet::Partition::kWholeModel;
    case Algo::kAnilS:
      return tasnet::Partition::kSeparatorOnly;
    case Algo::kAnilC:
      return tasnet::Partition::kAutoencoderOnly;
  }
  fail("unknown algorithm value");
}

const char* regime_name(Regime r) {
  switch (r) {
    case Regime::kM:
      return "m";
    case Regime::kAS:
      return "a_s";
    case Regime::kAC:
      return "a_c";
  }
  fail("unknown regime value");
}

Regime regime_from_name(const std::string& name) {
  if (name == "m") return Regime::kM;
  if (name == "a_s") return Regime::kAS;
  if (name == "a_c") return Regime::kAC;
  fail("unknown adaptation regime \"", name, "\", expected m | a_s | a_c");
}

tasnet::Partition regime_partition(Regime r) {
  switch (r) {
    case Regime::kM:
      return tasnet::Partition::kWholeModel;
    case Regime::kAS:
      return tasnet::Partition::kSeparatorOnly;
    case Regime::kAC:
      return tasnet::Partition::kAutoencoderOnly;
  }
  fail("unknown regime value");
}

std::string resolve_data_root(const std::string& configured) {
  if (!configured.empty()) return configured;
  const char* env = std::getenv("METASEP_DATA_ROOT");
  if (env != nullptr && *env != '\0') return env;
  return ".";
}

std::string resolve_manifest(const std::string& configured,
                             const std::string& manifest) {
  const fs::path m(manifest);
  if (m.is_absolute()) return manifest;
  return (fs::path(resolve_data_root(configured)) / m).string();
}

std::vector<double> default_alpha_grid() {
  return {1e-6, 5e-6, 1e-5, 5e-5, 1e-4, 5e-4, 1e-3, 5e-3, 1e-2, 5e-2};
}

PretrainResult run_pretrain(const ExperimentConfig& cfg) {
  MS_CHECK(cfg.pretrain_epochs >= 1, "pretraining needs at least one epoch");
  MS_CHECK(cfg.pretrain_batch >= 1, "minibatch size must be >= 1");
  MS_CHECK(cfg.pretrain_lr > 0.0, "learning rate must be positive");
  MS_CHECK(cfg.half_fraction > 0.0 && cfg.half_fraction <= 1.0,
           "half_fraction must be in (0, 1], got ", cfg.half_fraction);
  fs::create_directories(cfg.out_dir);

  const std::string manifest = resolve_manifest(cfg.data_root, cfg.train_manifest);
  auto recs = taskgen::read_manifest(manifest);
  const std::string root = fs::path(manifest).parent_path().string();

  std::vector<taskgen::ManifestTask> train_recs, dev_recs;
  for (auto& r : recs) {
    (r.role == "dev" ? dev_recs : train_recs).push_back(std::move(r));
  }
  MS_CHECK(!train_recs.empty(), "manifest ", manifest, " has no training tasks");
  MS_CHECK(!dev_recs.empty(), "manifest ", manifest,
           " has no dev tasks for model selection");

  auto train_tasks = load_tasks(train_recs, root, cfg.threads);
  auto dev_tasks = load_tasks(dev_recs, root, cfg.threads);

  // The supervised baseline ignores the episode structure and pools every
  // labelled mixture.
  std::vector<meta::Example> pool, dev_pool;
  for (const meta::Task& t : train_tasks) {
    pool.insert(pool.end(), t.support.begin(), t.support.end());
    pool.insert(pool.end(), t.query.begin(), t.query.end());
  }
  for (const meta::Task& t : dev_tasks) {
    dev_pool.insert(dev_pool.end(), t.support.begin(), t.support.end());
    dev_pool.insert(dev_pool.end(), t.query.begin(), t.query.end());
  }

  tasnet::ModelParams params =
      cfg.init_checkpoint.empty()
          ? tasnet::init_params(cfg.model, mix_seed(cfg.seed, 0x1717))
          : tasnet::load_checkpoint(cfg.init_checkpoint);
  const meta::LossBuilder loss = meta::separation_loss();
  meta::AdamOptimizer adam(cfg.pretrain_lr);

  PretrainResult result;
  std::ostringstream csv;
  csv << "epoch,split,loss\n";

  result.initial_dev_loss = meta::eval_mean_loss(params, dev_pool, loss);
  csv << "0,dev," << format_fixed(result.initial_dev_loss, 6) << "\n";

  double best = result.initial_dev_loss;
  int best_epoch = 0;
  tasnet::ModelParams best_params = params.clone();

  const int half_epoch = std::max(
      1, static_cast<int>(std::lround(cfg.half_fraction * cfg.pretrain_epochs)));

  std::mt19937_64 rng(mix_seed(cfg.seed, 0xB007));
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_acc = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.pretrain_batch)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(cfg.pretrain_batch));
      std::vector<meta::Example> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) batch.push_back(pool[order[k]]);

      double value = 0.0;
      if (cfg.use_adam) {
        value = meta::grad_mean_loss(params, batch, loss);
        adam.step(params);
      } else {
        params = meta::multitask_step(params, batch, cfg.pretrain_lr, loss, &value);
      }
      epoch_acc += value;
      ++batches;
    }
    const double train_mean = epoch_acc / batches;
    result.train_epoch_loss.push_back(train_mean);
    const double dev = meta::eval_mean_loss(params, dev_pool, loss);
    csv << epoch << ",train," << format_fixed(train_mean, 6) << "\n";
    csv << epoch << ",dev," << format_fixed(dev, 6) << "\n";

    if (dev < best) {
      best = dev;
      best_epoch = epoch;
      best_params = params.clone();
    }
    if (epoch == half_epoch) {
      result.half_checkpoint = (fs::path(cfg.out_dir) / "pretrain_half.ckpt").string();
      tasnet::save_checkpoint(result.half_checkpoint, params);
    }
  }

  result.best_dev_loss = best;
  result.best_epoch = best_epoch;
  result.best_checkpoint = (fs::path(cfg.out_dir) / "pretrain_best.ckpt").string();
  tasnet::save_checkpoint(result.best_checkpoint, best_params);
  result.loss_csv = (fs::path(cfg.out_dir) / "pretrain_loss.csv").string();
  write_text_file(result.loss_csv, csv.str());

  json summary;
  summary["mode"] = "pretrain";
  summary["config"] = config_to_json(cfg);
  summary["initial_dev_loss"] = result.initial_dev_loss;
  summary["best_dev_loss"] = result.best_dev_loss;
  summary["best_epoch"] = result.best_epoch;
  summary["best_checkpoint"] = result.best_checkpoint;
  summary["half_checkpoint"] = result.half_checkpoint;
  write_text_file((fs::path(cfg.out_dir) / "pretrain_summary.json").string(),
                  summary.dump(2) + "\n");
  return result;
}

MetaTrainResult run_meta_train(const ExperimentConfig& cfg) {
  MS_CHECK(cfg.meta_epochs >= 1, "meta-training needs at least one epoch");
  MS_CHECK(cfg.algo != Algo::kMultitask,
           "the multitask baseline trains through pretraining, not the "
           "episodic loop");
  fs::create_directories(cfg.out_dir);

  meta::MetaConfig mcfg = cfg.meta;
  mcfg.partition = algo_partition(cfg.algo);
  mcfg.validate();

  const std::string manifest = resolve_manifest(cfg.data_root, cfg.train_manifest);
  auto recs = taskgen::read_manifest(manifest);
  const std::string root = fs::path(manifest).parent_path().string();

  std::vector<taskgen::ManifestTask> train_recs, dev_recs;
  for (auto& r : recs) {
    (r.role == "dev" ? dev_recs : train_recs).push_back(std::move(r));
  }
  MS_CHECK(!train_recs.empty(), "manifest ", manifest, " has no training tasks");
  MS_CHECK(!dev_recs.empty(), "manifest ", manifest,
           " has no dev tasks for model selection");

  auto train_tasks = load_tasks(train_recs, root, cfg.threads);
  auto dev_tasks = load_tasks(dev_recs, root, cfg.threads);

  tasnet::ModelParams params =
      cfg.init_checkpoint.empty()
          ? tasnet::init_params(cfg.model, mix_seed(cfg.seed, 0x1717))
          : tasnet::load_checkpoint(cfg.init_checkpoint);
  const meta::LossBuilder loss = meta::separation_loss();

  auto dev_loss = [&](const tasnet::ModelParams& p) {
    // Mean per-task meta loss, parallel over dev tasks.
    std::vector<double> per_task(dev_tasks.size());
    parallel_for(dev_tasks.size(), cfg.threads, [&](std::size_t i) {
      per_task[i] = meta::meta_loss(p, {dev_tasks[i]}, mcfg, loss).total;
    });
    return mean_of(per_task);
  };

  MetaTrainResult result;
  std::ostringstream csv;
  csv << "epoch,split,loss\n";
  result.initial_dev_loss = dev_loss(params);
  csv << "0,dev_meta," << format_fixed(result.initial_dev_loss, 6) << "\n";

  double best = result.initial_dev_loss;
  int best_epoch = 0;
  tasnet::ModelParams best_params = params.clone();

  std::mt19937_64 rng(mix_seed(cfg.seed, 0xE9));
  std::vector<std::size_t> order(train_tasks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (int epoch = 1; epoch <= cfg.meta_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(mcfg.batch_size)) {
      const std::size_t stop = std::min(
          order.size(), start + static_cast<std::size_t>(mcfg.batch_size));
      std::vector<meta::Task> batch;
      batch.reserve(stop - start);
      for (std::size_t k = start; k < stop; ++k) batch.push_back(train_tasks[order[k]]);
      params = meta::meta_step(params, batch, mcfg, loss);
    }
    const double dev = dev_loss(params);
    csv << epoch << ",dev_meta," << format_fixed(dev, 6) << "\n";
    if (dev < best) {
      best = dev;
      best_epoch = epoch;
      best_params = params.clone();
    }
  }

  result.best_dev_loss = best;
  result.best_epoch = best_epoch;
  result.best_checkpoint =
      (fs::path(cfg.out_dir) / concat(algo_name(cfg.algo), "_best.ckpt")).string();
  tasnet::save_checkpoint(result.best_checkpoint, best_params);
  result.loss_csv = (fs::path(cfg.out_dir) / "meta_loss.csv").string();
  write_text_file(result.loss_csv, csv.str());

  json summary;
  summary["mode"] = "meta-train";
  summary["config"] = config_to_json(cfg);
  summary["initial_dev_loss"] = result.initial_dev_loss;
  summary["best_dev_loss"] = result.best_dev_loss;
  summary["best_epoch"] = result.best_epoch;
  summary["best_checkpoint"] = result.best_checkpoint;
  write_text_file((fs::path(cfg.out_dir) / "meta_summary.json").string(),
                  summary.dump(2) + "\n");
  return result;
}

AdaptationReport run_adapt_eval(const ExperimentConfig& cfg) {
  MS_CHECK(cfg.adapt_alpha > 0.0, "adaptation rate must be positive, got ",
           cfg.adapt_alpha);
  MS_CHECK(cfg.adapt_steps >= 1, "adaptation needs at least one step");
  fs::create_directories(cfg.out_dir);

  EvalContext ctx = load_eval_context(cfg);
  ComboScores scores =
      score_tasks(ctx, regime_partition(cfg.regime), cfg.adapt_alpha,
                  cfg.adapt_steps, cfg.threads, nullptr);

  AdaptationReport report;
  report.checkpoint = cfg.init_checkpoint;
  report.manifest = ctx.manifest_path;
  report.method_label = default_method_label(cfg);
  report.regime = cfg.regime;
  report.alpha = cfg.adapt_alpha;
  report.steps = cfg.adapt_steps;
  for (std::size_t i = 0; i < ctx.tasks.size(); ++i) {
    report.tasks.push_back({ctx.tasks[i].id, scores.pre[i], scores.post[i]});
  }
  report.pre_mean = mean_of(scores.pre);
  report.post_mean = mean_of(scores.post);
  report.pre_std = std_of(scores.pre, report.pre_mean);
  report.post_std = std_of(scores.post, report.post_mean);
  report.delta_mean = report.post_mean - report.pre_mean;

  std::ostringstream csv;
  csv << "task_id,pre_sisnri_db,post_sisnri_db\n";
  for (const TaskScore& t : report.tasks) {
    csv << t.task_id << "," << format_fixed(t.pre, 6) << ","
        << format_fixed(t.post, 6) << "\n";
  }
  report.csv_path = (fs::path(cfg.out_dir) / "adapt_eval.csv").string();
  write_text_file(report.csv_path, csv.str());

  json summary;
  summary["mode"] = "adapt-eval";
  summary["config"] = config_to_json(cfg);
  summary["method"] = report.method_label;
  summary["regime"] = regime_name(cfg.regime);
  summary["alpha"] = cfg.adapt_alpha;
  summary["steps"] = cfg.adapt_steps;
  summary["checkpoint"] = cfg.init_checkpoint;
  summary["manifest"] = ctx.manifest_path;
  summary["column"] = fs::path(ctx.manifest_path).stem().string();
  summary["aggregates"] = {{"pre_mean", report.pre_mean},
                           {"post_mean", report.post_mean},
                           {"pre_std", report.pre_std},
                           {"post_std", report.post_std},
                           {"delta_mean", report.delta_mean}};
  json rows = json::array();
  for (const TaskScore& t : report.tasks) {
    rows.push_back({{"task_id", t.task_id}, {"pre", t.pre}, {"post", t.post}});
  }
  summary["tasks"] = std::move(rows);
  report.json_path = (fs::path(cfg.out_dir) / "adapt_summary.json").string();
  write_text_file(report.json_path, summary.dump(2) + "\n");
  return report;
}

SweepResult run_lr_sweep(const ExperimentConfig& cfg,
                         std::vector<double> alphas) {
  MS_CHECK(!alphas.empty(), "the sweep needs at least one adaptation rate");
  for (double a : alphas) {
    MS_CHECK(a > 0.0, "adaptation rates must be positive, got ", a);
  }
  fs::create_directories(cfg.out_dir);

  EvalContext ctx = load_eval_context(cfg);

  // Pre-adaptation scores do not depend on (regime, alpha); compute once.
  std::vector<double> pre(ctx.tasks.size());
  parallel_for(ctx.tasks.size(), cfg.threads, [&](std::size_t i) {
    pre[i] = mean_query_sisnri(ctx.params, ctx.tasks[i]);
  });
  const double pre_mean = mean_of(pre);

  SweepResult result;
  bool have_best = false;
  for (Regime regime : {Regime::kM, Regime::kAS, Regime::kAC}) {
    for (double alpha : alphas) {
      ComboScores scores = score_tasks(ctx, regime_partition(regime), alpha,
                                       cfg.adapt_steps, cfg.threads, &pre);
      SweepRow row;
      row.regime = regime;
      row.alpha = alpha;
      row.pre_mean = pre_mean;
      row.post_mean = mean_of(scores.post);
      row.post_std = std_of(scores.post, row.post_mean);
      if (!have_best || row.post_mean > result.best.post_mean) {
        result.best = row;
        have_best = true;
      }
      result.rows.push_back(row);
    }
  }

  std::ostringstream csv;
  csv << "regime,alpha,pre_mean_sisnri_db,post_mean_sisnri_db,post_std_db\n";
  for (const SweepRow& row : result.rows) {
    csv << regime_name(row.regime) << "," << row.alpha << ","
        << format_fixed(row.pre_mean, 6) << "," << format_fixed(row.post_mean, 6)
        << "," << format_fixed(row.post_std, 6) << "\n";
  }
  result.csv_path = (fs::path(cfg.out_dir) / "sweep.csv").string();
  write_text_file(result.csv_path, csv.str());

  json summary;
  summary["mode"] = "sweep-lr";
  summary["config"] = config_to_json(cfg);
  summary["checkpoint"] = cfg.init_checkpoint;
  summary["manifest"] = ctx.manifest_path;
  summary["best"] = {{"regime", regime_name(result.best.regime)},
                     {"alpha", result.best.alpha},
                     {"post_mean", result.best.post_mean}};
  json rows = json::array();
  for (const SweepRow& row : result.rows) {
    rows.push_back({{"regime", regime_name(row.regime)},
                    {"alpha", row.alpha},
                    {"pre_mean", row.pre_mean},
                    {"post_mean", row.post_mean},
                    {"post_std", row.post_std}});
  }
  summary["rows"] = std::move(rows);
  write_text_file((fs::path(cfg.out_dir) / "sweep_summary.json").string(),
                  summary.dump(2) + "\n");
  return result;
}

ReportTable build_report(const std::vector<std::string>& summary_json_paths) {
  MS_CHECK(!summary_json_paths.empty(), "no summaries to report on");
  ReportTable table;
  for (const std::string& path : summary_json_paths) {
    std::ifstream is(path);
    MS_CHECK(is.is_open(), "cannot open summary: ", path);
    json j;
    try {
      is >> j;
    } catch (const json::exception& e) {
      fail("summary ", path, ": ", e.what());
    }
    MS_CHECK(j.value("mode", "") == "adapt-eval", "summary ", path,
             " was not produced by adapt-eval");
    const std::string method = j.at("method").get<std::string>();
    const std::string adaptation = j.at("regime").get<std::string>();
    const std::string column = j.at("column").get<std::string>();
    const double value = j.at("aggregates").at("post_mean").get<double>();

    if (std::find(table.columns.begin(), table.columns.end(), column) ==
        table.columns.end()) {
      table.columns.push_back(column);
    }
    ReportRow* row = nullptr;
    for (ReportRow& r : table.rows) {
      if (r.method == method && r.adaptation == adaptation) {
        row = &r;
        break;
      }
    }
    if (row == nullptr) {
      table.rows.push_back({method, adaptation, {}});
      row = &table.rows.back();
    }
    (*row).values[column] = value;
  }
  return table;
}

std::string emit_report_text(const ReportTable& table) {
  MS_CHECK(!table.rows.empty(), "report table has no rows");
  std::size_t method_w = 6;  // "method"
  for (const ReportRow& r : table.rows) {
    MS_CHECK(r.method.find_first_of(" \t") == std::string::npos,
             "method labels cannot contain whitespace: \"", r.method, "\"");
    method_w = std::max(method_w, r.method.size());
  }
  std::size_t adapt_w = 5;  // "adapt"
  for (const ReportRow& r : table.rows) {
    adapt_w = std::max(adapt_w, r.adaptation.size());
  }

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(method_w + 2)) << "method"
     << std::setw(static_cast<int>(adapt_w + 2)) << "adapt";
  for (const std::string& c : table.columns) {
    os << std::right << std::setw(static_cast<int>(std::max<std::size_t>(c.size(), 10) + 2)) << c;
  }
  os << "\n";
  for (const ReportRow& r : table.rows) {
    os << std::left << std::setw(static_cast<int>(method_w + 2)) << r.method
       << std::setw(static_cast<int>(adapt_w + 2))
       << (r.adaptation.empty() ? "-" : r.adaptation);
    for (const std::string& c : table.columns) {
      const auto it = r.values.find(c);
      const std::string cell =
          it == r.values.end() ? "-" : format_fixed(it->second, 2);
      os << std::right
         << std::setw(static_cast<int>(std::max<std::size_t>(c.size(), 10) + 2)) << cell;
    }
    os << "\n";
  }
  return os.str();
}

std::string emit_report_csv(const ReportTable& table) {
  std::ostringstream os;
  os << "method,adapt";
  for (const std::string& c : table.columns) os << "," << c;
  os << "\n";
  for (const ReportRow& r : table.rows) {
    os << r.method << "," << (r.adaptation.empty() ? "-" : r.adaptation);
    for (const std::string& c : table.columns) {
      const auto it = r.values.find(c);
      os << ",";
      if (it != r.values.end()) os << format_fixed(it->second, 6);
    }
    os << "\n";
  }
  return os.str();
}

std::string emit_report_json(const ReportTable& table) {
  json j;
  j["columns"] = table.columns;
  json rows = json::array();
  for (const ReportRow& r : table.rows) {
    json values;
    for (const auto& [col, v] : r.values) values[col] = v;
    rows.push_back({{"method", r.method},
                    {"adapt", r.adaptation.empty() ? "-" : r.adaptation},
                    {"values", std::move(values)}});
  }
  j["rows"] = std::move(rows);
  return j.dump(2) + "\n";
}

ReportTable parse_report_table(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  MS_CHECK(static_cast<bool>(std::getline(is, line)), "empty report text");

  auto tokenize = [](const std::string& s) {
    std::istringstream ts(s);
    std::vector<std::string> tokens;
    std::string tok;
    while (ts >> tok) tokens.push_back(tok);
    return tokens;
  };

  const auto header = tokenize(line);
  MS_CHECK(header.size() >= 3 && header[0] == "method" && header[1] == "adapt",
           "unrecognized report header: \"", line, "\"");

  ReportTable table;
  table.columns.assign(header.begin() + 2, header.end());
  while (std::getline(is, line)) {
    const auto tokens = tokenize(line);
    if (tokens.empty()) continue;
    MS_CHECK(tokens.size() == header.size(), "report row has ", tokens.size(),
             " fields, header has ", header.size(), ": \"", line, "\"");
    ReportRow row;
    row.method = tokens[0];
    row.adaptation = tokens[1] == "-" ? "" : tokens[1];
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      const std::string& cell = tokens[c + 2];
      if (cell == "-") continue;
      row.values[table.columns[c]] = std::stod(cell);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

}  // namespace metasep::harness
