// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef METASEP_METALEARN_H_
#define METASEP_METALEARN_H_

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "metasep/audio.h"
#include "metasep/objective.h"
#include "metasep/tasnet.h"
#include "metasep/tensor.h"

namespace metasep::meta {

// One labelled mixture.
struct Example {
  AudioSignal mixture;
  std::vector<AudioSignal> references;
};

// A two-speaker adaptation episode: one support mixture to adapt on, the
// held-out query mixtures to evaluate on.
struct Task {
  std::string id;
  std::vector<Example> support;
  std::vector<Example> query;
};

enum class MetaGradMode { kFirstOrder, kFiniteDifferenceExact };

const char* meta_grad_mode_name(MetaGradMode m);

struct MetaConfig {
  double alpha = 0.01;   // inner-loop (adaptation) learning rate
  double beta = 1e-4;    // outer-loop (meta) learning rate
  int batch_size = 1;    // tasks per meta update
  int inner_steps = 1;
  tasnet::Partition partition = tasnet::Partition::kWholeModel;
  MetaGradMode meta_grad_mode = MetaGradMode::kFirstOrder;
  // Exact meta-gradients perturb every scalar parameter twice; anything
  // bigger than this is a mistake, not a request.
  std::int64_t fd_exact_param_limit = 2000;
  double fd_exact_step = 1e-5;
  bool allow_multi_shot_finetune = false;

  void validate() const;
};

// Builds the training loss for one example on the given tape. Keeping this
// pluggable lets the meta-learners run against tiny analytic problems in
// tests as well as the real separation loss.
using LossBuilder = std::function<ag::Tensor(
    ag::Tape&, const tasnet::ModelParams&, const Example&)>;

// Mean uPIT loss of the model's separation of the example mixture.
LossBuilder separation_loss(objective::SiSnrOptions opts = {});

struct AdaptedParams {
  tasnet::ModelParams params;
  std::vector<double> inner_losses;  // support loss before each inner step
};

// inner_steps gradient-descent steps on the mean support loss, updating only
// the tensors selected by cfg.partition. The input is left untouched.
AdaptedParams inner_adapt(const tasnet::ModelParams& base,
                          const std::vector<Example>& support,
                          const MetaConfig& cfg, const LossBuilder& loss);

struct MetaLossResult {
  double total = 0.0;             // sum over tasks of mean query loss
  std::vector<double> per_task;
  std::vector<AdaptedParams> adapted;
};

MetaLossResult meta_loss(const tasnet::ModelParams& params,
                         const std::vector<Task>& tasks, const MetaConfig& cfg,
                         const LossBuilder& loss);

// One outer update over a batch of tasks. kFirstOrder backpropagates the
// query loss at the adapted parameters and treats the adaptation step as
// constant; kFiniteDifferenceExact differentiates through the whole
// adapt-then-evaluate pipeline numerically.
tasnet::ModelParams meta_step(const tasnet::ModelParams& params,
                              const std::vector<Task>& tasks,
                              const MetaConfig& cfg, const LossBuilder& loss);

// Deployment-time adaptation: same update rule as inner_adapt, restricted to
// a single support example unless cfg.allow_multi_shot_finetune is set.
tasnet::ModelParams finetune(const tasnet::ModelParams& params,
                             const std::vector<Example>& sample,
                             const MetaConfig& cfg, const LossBuilder& loss);

// Conventional supervised baseline: one step on the mean loss over the
// minibatch, updating all parameters. loss_value, when given, receives the
// pre-update minibatch loss.
tasnet::ModelParams multitask_step(const tasnet::ModelParams& params,
                                   const std::vector<Example>& minibatch,
                                   double lr, const LossBuilder& loss,
                                   double* loss_value = nullptr);

// Backpropagates the mean loss over the examples, leaving the gradients on
// the parameter tensors for an external optimizer. Returns the loss.
double grad_mean_loss(tasnet::ModelParams& params,
                      const std::vector<Example>& examples,
                      const LossBuilder& loss);

// Adam with bias correction, state keyed by tensor path. Used by the
// supervised pretraining loop; the meta updates stay plain gradient descent.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  // Applies one step using the gradients currently held by the tensors.
  void step(tasnet::ModelParams& params);

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::int64_t t_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

// Mean loss over a set of examples, evaluated without updates.
double eval_mean_loss(const tasnet::ModelParams& params,
                      const std::vector<Example>& examples,
                      const LossBuilder& loss);

}  // namespace metasep::meta

#endif  // METASEP_METALEARN_H_
