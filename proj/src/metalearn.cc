// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metasep/metalearn.h"

#include <cmath>
#include <utility>

#include "metasep/error.h"
#include "metasep/ops.h"

namespace metasep::meta {

namespace {

// Mean of per-example loss nodes on one tape.
ag::Tensor mean_loss_node(ag::Tape& tape, const tasnet::ModelParams& params,
                          const std::vector<Example>& examples,
                          const LossBuilder& loss) {
  ag::Tensor total = loss(tape, params, examples[0]);
  for (std::size_t i = 1; i < examples.size(); ++i) {
    total = ag::add(tape, total, loss(tape, params, examples[i]));
  }
  return ag::scale(tape, total, 1.0 / static_cast<double>(examples.size()));
}

void apply_sgd(tasnet::ModelParams& params, tasnet::Partition partition,
               double lr) {
  for (auto& [path, tensor] : params.tensors) {
    if (!tasnet::path_in_partition(path, partition)) continue;
    if (!tensor.has_grad()) continue;
    auto v = tensor.values();
    auto g = tensor.grad();
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
  }
}

}  // namespace

const char* meta_grad_mode_name(MetaGradMode m) {
  switch (m) {
    case MetaGradMode::kFirstOrder:
      return "first_order";
    case MetaGradMode::kFiniteDifferenceExact:
      return "finite_difference_exact";
  }
  fail("unknown meta gradient mode");
}

void MetaConfig::validate() const {
  MS_CHECK(alpha >= 0.0, "inner learning rate must not be negative, got ",
           alpha);
  MS_CHECK(beta >= 0.0, "meta learning rate must not be negative, got ", beta);
  MS_CHECK(batch_size >= 1, "batch_size must be >= 1, got ", batch_size);
  MS_CHECK(inner_steps >= 1, "inner_steps must be >= 1, got ", inner_steps);
  MS_CHECK(fd_exact_step > 0.0, "fd_exact_step must be positive");
  MS_CHECK(fd_exact_param_limit > 0, "fd_exact_param_limit must be positive");
}

LossBuilder separation_loss(objective::SiSnrOptions opts) {
  return [opts](ag::Tape& tape, const tasnet::ModelParams& params,
                const Example& ex) -> ag::Tensor {
    MS_CHECK(static_cast<std::int64_t>(ex.references.size()) ==
                 params.config.num_sources,
             "example has ", ex.references.size(), " references, model emits ",
             params.config.num_sources, " sources");
    std::vector<ag::Tensor> estimates =
        tasnet::forward(tape, params, tasnet::signal_tensor(ex.mixture));
    std::vector<ag::Tensor> references;
    references.reserve(ex.references.size());
    for (const AudioSignal& r : ex.references) {
      references.push_back(ag::Tensor::from_values(
          {static_cast<std::int64_t>(r.samples.size())}, r.samples, false));
    }
    return objective::upit_loss(tape, estimates, references, opts).node;
  };
}

AdaptedParams inner_adapt(const tasnet::ModelParams& base,
                          const std::vector<Example>& support,
                          const MetaConfig& cfg, const LossBuilder& loss) {
  cfg.validate();
  MS_CHECK(!support.empty(), "inner_adapt needs at least one support example");

  AdaptedParams out;
  out.params = base.clone();
  for (int step = 0; step < cfg.inner_steps; ++step) {
    ag::Tape tape;
    ag::Tensor support_loss = mean_loss_node(tape, out.params, support, loss);
    const double value = support_loss.scalar_value();
    MS_CHECK(std::isfinite(value), "support loss is not finite (", value,
             ") at inner step ", step);
    out.inner_losses.push_back(value);
    tape.backward(support_loss);
    apply_sgd(out.params, cfg.partition, cfg.alpha);
    out.params.zero_grads();
  }
  return out;
}

double eval_mean_loss(const tasnet::ModelParams& params,
                      const std::vector<Example>& examples,
                      const LossBuilder& loss) {
  MS_CHECK(!examples.empty(), "cannot evaluate a loss over zero examples");
  ag::Tape tape;
  return mean_loss_node(tape, params, examples, loss).scalar_value();
}

MetaLossResult meta_loss(const tasnet::ModelParams& params,
                         const std::vector<Task>& tasks, const MetaConfig& cfg,
                         const LossBuilder& loss) {
  MS_CHECK(!tasks.empty(), "meta loss needs at least one task");
  MetaLossResult result;
  for (const Task& task : tasks) {
    MS_CHECK(!task.query.empty(), "task \"", task.id,
             "\" has no query examples");
    AdaptedParams adapted = inner_adapt(params, task.support, cfg, loss);
    const double q = eval_mean_loss(adapted.params, task.query, loss);
    result.per_task.push_back(q);
    result.total += q;
    result.adapted.push_back(std::move(adapted));
  }
  return result;
}

tasnet::ModelParams meta_step(const tasnet::ModelParams& params,
                              const std::vector<Task>& tasks,
                              const MetaConfig& cfg, const LossBuilder& loss) {
  cfg.validate();
  MS_CHECK(!tasks.empty(), "meta_step needs at least one task");

  // Meta-gradient of the summed (over tasks) mean query loss, keyed by path.
  std::map<std::string, std::vector<double>> grad_sum;

  if (cfg.meta_grad_mode == MetaGradMode::kFirstOrder) {
    for (const Task& task : tasks) {
      MS_CHECK(!task.query.empty(), "task \"", task.id,
               "\" has no query examples");
      AdaptedParams adapted = inner_adapt(params, task.support, cfg, loss);
      ag::Tape tape;
      ag::Tensor query_loss =
          mean_loss_node(tape, adapted.params, task.query, loss);
      const double value = query_loss.scalar_value();
      MS_CHECK(std::isfinite(value), "query loss is not finite (", value,
               ") for task \"", task.id, "\"");
      tape.backward(query_loss);
      for (auto& [path, tensor] : adapted.params.tensors) {
        if (!tensor.has_grad()) continue;
        auto& acc = grad_sum[path];
        if (acc.empty()) acc.assign(static_cast<std::size_t>(tensor.numel()), 0.0);
        auto g = tensor.grad();
        for (std::size_t i = 0; i < g.size(); ++i) acc[i] += g[i];
      }
    }
  } else {
    const std::int64_t n = params.total_values();
    MS_CHECK(n <= cfg.fd_exact_param_limit,
             "exact meta-gradients perturb every parameter twice; the model "
             "has ",
             n, " values, limit is ", cfg.fd_exact_param_limit);
    const double h = cfg.fd_exact_step;
    tasnet::ModelParams probe = params.clone();
    for (auto& [path, tensor] : probe.tensors) {
      auto v = tensor.values();
      auto& acc = grad_sum[path];
      acc.assign(v.size(), 0.0);
      for (std::size_t i = 0; i < v.size(); ++i) {
        const double orig = v[i];
        v[i] = orig + h;
        const double up = meta_loss(probe, tasks, cfg, loss).total;
        v[i] = orig - h;
        const double down = meta_loss(probe, tasks, cfg, loss).total;
        v[i] = orig;
        acc[i] = (up - down) / (2.0 * h);
      }
    }
  }

  tasnet::ModelParams next = params.clone();
  for (auto& [path, tensor] : next.tensors) {
    auto it = grad_sum.find(path);
    if (it == grad_sum.end()) continue;
    auto v = tensor.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] -= cfg.beta * it->second[i];
    }
  }
  return next;
}

tasnet::ModelParams finetune(const tasnet::ModelParams& params,
                             const std::vector<Example>& sample,
                             const MetaConfig& cfg, const LossBuilder& loss) {
  MS_CHECK(!sample.empty(), "finetune needs a support example");
  MS_CHECK(sample.size() == 1 || cfg.allow_multi_shot_finetune,
           "finetune is one-shot, got ", sample.size(),
           " support examples (set allow_multi_shot_finetune to override)");
  return inner_adapt(params, sample, cfg, loss).params;
}

double grad_mean_loss(tasnet::ModelParams& params,
                      const std::vector<Example>& examples,
                      const LossBuilder& loss) {
  MS_CHECK(!examples.empty(), "cannot take gradients over zero examples");
  ag::Tape tape;
  ag::Tensor batch_loss = mean_loss_node(tape, params, examples, loss);
  const double value = batch_loss.scalar_value();
  MS_CHECK(std::isfinite(value), "minibatch loss is not finite (", value, ")");
  tape.backward(batch_loss);
  return value;
}

tasnet::ModelParams multitask_step(const tasnet::ModelParams& params,
                                   const std::vector<Example>& minibatch,
                                   double lr, const LossBuilder& loss,
                                   double* loss_value) {
  MS_CHECK(!minibatch.empty(), "multitask_step needs a non-empty minibatch");
  MS_CHECK(lr >= 0.0, "learning rate must not be negative, got ", lr);
  tasnet::ModelParams next = params.clone();
  const double value = grad_mean_loss(next, minibatch, loss);
  if (loss_value != nullptr) *loss_value = value;
  apply_sgd(next, tasnet::Partition::kWholeModel, lr);
  next.zero_grads();
  return next;
}

AdamOptimizer::AdamOptimizer(double lr, double beta1, double beta2,
                             double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  MS_CHECK(lr > 0.0, "Adam learning rate must be positive, got ", lr);
  MS_CHECK(beta1 >= 0.0 && beta1 < 1.0, "Adam beta1 out of range: ", beta1);
  MS_CHECK(beta2 >= 0.0 && beta2 < 1.0, "Adam beta2 out of range: ", beta2);
}

void AdamOptimizer::step(tasnet::ModelParams& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (auto& [path, tensor] : params.tensors) {
    if (!tensor.has_grad()) continue;
    auto v = tensor.values();
    auto g = tensor.grad();
    auto& m = m_[path];
    auto& s = v_[path];
    if (m.empty()) m.assign(v.size(), 0.0);
    if (s.empty()) s.assign(v.size(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      s[i] = beta2_ * s[i] + (1.0 - beta2_) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double shat = s[i] / bc2;
      v[i] -= lr_ * mhat / (std::sqrt(shat) + epsilon_);
    }
  }
  params.zero_grads();
}

}  // namespace metasep::meta
