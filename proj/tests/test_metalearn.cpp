// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "metasep/audio.h"
#include "metasep/error.h"
#include "metasep/metalearn.h"
#include "metasep/ops.h"
#include "metasep/tasnet.h"
#include "metasep/tensor.h"

using metasep::AudioSignal;
using metasep::Error;
namespace ag = metasep::ag;
namespace meta = metasep::meta;
namespace tasnet = metasep::tasnet;

namespace {

// Scalar quadratic family: L(params; t) = 0.5*(theta - t)^2 + 0.5*(e - t)^2
// with theta in the separator group and e in the encoder group. The target t
// rides in the example's first sample.
tasnet::ModelParams probe_params(double theta, double e) {
  tasnet::ModelParams p;
  p.config = tasnet::ModelConfig::tiny();
  p.tensors.emplace_back("separator/theta",
                         ag::Tensor::scalar(theta, /*requires_grad=*/true));
  p.tensors.emplace_back("encoder/e",
                         ag::Tensor::scalar(e, /*requires_grad=*/true));
  return p;
}

meta::Example probe_example(double t) {
  meta::Example ex;
  ex.mixture.samples = {t};
  return ex;
}

meta::LossBuilder probe_loss() {
  return [](ag::Tape& tape, const tasnet::ModelParams& params,
            const meta::Example& ex) {
    const double t = ex.mixture.samples[0];
    ag::Tensor half = ag::Tensor::scalar(0.5);
    ag::Tensor d1 = ag::add_scalar(tape, params.at("separator/theta"), -t);
    ag::Tensor d2 = ag::add_scalar(tape, params.at("encoder/e"), -t);
    return ag::add(tape, ag::mul(tape, ag::mul(tape, d1, d1), half),
                   ag::mul(tape, ag::mul(tape, d2, d2), half));
  };
}

// Same family restricted to theta, for closed-form meta-gradient checks.
meta::LossBuilder theta_only_loss() {
  return [](ag::Tape& tape, const tasnet::ModelParams& params,
            const meta::Example& ex) {
    const double t = ex.mixture.samples[0];
    ag::Tensor d = ag::add_scalar(tape, params.at("separator/theta"), -t);
    return ag::scale(tape, ag::mul(tape, d, d), 0.5);
  };
}

meta::Task probe_task(double t) {
  meta::Task task;
  task.id = "probe";
  task.support = {probe_example(t)};
  task.query = {probe_example(t)};
  return task;
}

double theta_of(const tasnet::ModelParams& p) {
  return p.at("separator/theta").scalar_value();
}

AudioSignal random_signal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.8, 0.8);
  AudioSignal s;
  s.samples.resize(n);
  for (double& x : s.samples) x = dist(rng);
  return s;
}

meta::Example random_example(std::uint64_t seed, std::size_t n = 32) {
  meta::Example ex;
  ex.mixture = random_signal(n, seed);
  ex.references = {random_signal(n, seed + 1000),
                   random_signal(n, seed + 2000)};
  return ex;
}

meta::Task random_task(std::uint64_t seed) {
  meta::Task task;
  task.id = "rand" + std::to_string(seed);
  task.support = {random_example(seed)};
  task.query = {random_example(seed + 50), random_example(seed + 60)};
  return task;
}

bool bit_equal(const tasnet::ModelParams& a, const tasnet::ModelParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].first != b.tensors[i].first) return false;
    auto av = a.tensors[i].second.values();
    auto bv = b.tensors[i].second.values();
    if (av.size() != bv.size()) return false;
    for (std::size_t j = 0; j < av.size(); ++j) {
      if (av[j] != bv[j]) return false;
    }
  }
  return true;
}

// Meta-gradient per tensor, recovered from a beta=1 update.
std::vector<double> meta_gradient(const tasnet::ModelParams& params,
                                  const std::vector<meta::Task>& tasks,
                                  meta::MetaConfig cfg,
                                  const meta::LossBuilder& loss) {
  cfg.beta = 1.0;
  tasnet::ModelParams next = meta::meta_step(params, tasks, cfg, loss);
  std::vector<double> g;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto pv = params.tensors[i].second.values();
    auto nv = next.tensors[i].second.values();
    for (std::size_t j = 0; j < pv.size(); ++j) g.push_back(pv[j] - nv[j]);
  }
  return g;
}

}  // namespace

TEST_CASE("inner_adapt matches the quadratic closed form") {
  meta::MetaConfig cfg;
  cfg.alpha = 0.1;

  auto one = meta::inner_adapt(probe_params(0.0, 0.0), {probe_example(1.0)},
                               cfg, theta_only_loss());
  CHECK_EQ(theta_of(one.params), doctest::Approx(0.1).epsilon(1e-14));
  REQUIRE_EQ(one.inner_losses.size(), 1);
  CHECK_EQ(one.inner_losses[0], doctest::Approx(0.5).epsilon(1e-14));

  cfg.inner_steps = 3;
  auto three = meta::inner_adapt(probe_params(0.0, 0.0), {probe_example(1.0)},
                                 cfg, theta_only_loss());
  CHECK_EQ(theta_of(three.params),
           doctest::Approx(1.0 - std::pow(0.9, 3)).epsilon(1e-12));
}

TEST_CASE("inner_adapt freezes tensors outside the partition") {
  meta::MetaConfig cfg;
  cfg.alpha = 0.1;
  auto base = probe_params(0.25, 0.75);

  cfg.partition = tasnet::Partition::kSeparatorOnly;
  auto sep = meta::inner_adapt(base, {probe_example(1.0)}, cfg, probe_loss());
  CHECK(sep.params.at("encoder/e").scalar_value() == 0.75);
  CHECK(theta_of(sep.params) != 0.25);

  cfg.partition = tasnet::Partition::kAutoencoderOnly;
  auto ae = meta::inner_adapt(base, {probe_example(1.0)}, cfg, probe_loss());
  CHECK(theta_of(ae.params) == 0.25);
  CHECK(ae.params.at("encoder/e").scalar_value() != 0.75);

  // The base model is never touched.
  CHECK(theta_of(base) == 0.25);
  CHECK(base.at("encoder/e").scalar_value() == 0.75);
}

TEST_CASE("meta_loss matches the quadratic closed form") {
  meta::MetaConfig cfg;
  cfg.alpha = 0.1;
  auto params = probe_params(0.0, 0.0);

  const double t1 = 1.0, t2 = -2.0;
  auto result = meta::meta_loss(params, {probe_task(t1), probe_task(t2)}, cfg,
                                theta_only_loss());
  auto expect = [&](double t) {
    const double adapted = 0.9 * (0.0 - t) + t;
    return 0.5 * (adapted - t) * (adapted - t);
  };
  REQUIRE_EQ(result.per_task.size(), 2);
  CHECK_EQ(result.per_task[0], doctest::Approx(expect(t1)).epsilon(1e-12));
  CHECK_EQ(result.per_task[1], doctest::Approx(expect(t2)).epsilon(1e-12));
  CHECK_EQ(result.total,
           doctest::Approx(expect(t1) + expect(t2)).epsilon(1e-12));

  // Two identical tasks double the total.
  auto twice = meta::meta_loss(params, {probe_task(t1), probe_task(t1)}, cfg,
                               theta_only_loss());
  CHECK_EQ(twice.total, doctest::Approx(2.0 * expect(t1)).epsilon(1e-12));
}

TEST_CASE("meta_loss with alpha 0 is the plain loss") {
  meta::MetaConfig cfg;
  cfg.alpha = 0.0;
  auto params = probe_params(0.3, 0.0);
  auto result =
      meta::meta_loss(params, {probe_task(1.0)}, cfg, theta_only_loss());
  CHECK_EQ(result.total, doctest::Approx(0.5 * 0.7 * 0.7).epsilon(1e-12));
}

TEST_CASE("meta_step first order matches the closed form") {
  meta::MetaConfig cfg;
  cfg.alpha = 0.1;
  cfg.beta = 1.0;
  auto params = probe_params(0.0, 0.0);

  // g = (1 - alpha) * (theta - t) = -0.9 for theta=0, t=1.
  auto next =
      meta::meta_step(params, {probe_task(1.0)}, cfg, theta_only_loss());
  CHECK_EQ(theta_of(next), doctest::Approx(0.9).epsilon(1e-12));
  CHECK_EQ(theta_of(params), 0.0);

  // Two identical tasks: the update sums, not averages.
  auto doubled = meta::meta_step(params, {probe_task(1.0), probe_task(1.0)},
                                 cfg, theta_only_loss());
  CHECK_EQ(theta_of(doubled), doctest::Approx(1.8).epsilon(1e-12));
}

TEST_CASE("meta_step exact mode matches the closed form") {
  meta::MetaConfig cfg;
  cfg.alpha = 0.1;
  cfg.beta = 1.0;
  cfg.meta_grad_mode = meta::MetaGradMode::kFiniteDifferenceExact;
  auto params = probe_params(0.0, 0.0);

  // g = (1 - alpha)^2 * (theta - t) = -0.81 for theta=0, t=1.
  auto next =
      meta::meta_step(params, {probe_task(1.0)}, cfg, theta_only_loss());
  CHECK_EQ(theta_of(next), doctest::Approx(0.81).epsilon(1e-6));
}

TEST_CASE("meta_step with beta 0 leaves parameters bit-identical") {
  meta::MetaConfig cfg;
  cfg.alpha = 0.1;
  cfg.beta = 0.0;
  auto params = probe_params(0.4, -0.2);
  auto next = meta::meta_step(params, {probe_task(1.0)}, cfg, probe_loss());
  CHECK(bit_equal(params, next));
}

TEST_CASE("exact mode refuses large models") {
  meta::MetaConfig cfg;
  cfg.meta_grad_mode = meta::MetaGradMode::kFiniteDifferenceExact;
  cfg.fd_exact_param_limit = 100;
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 30);
  CHECK_THROWS_AS(meta::meta_step(params, {random_task(1)}, cfg,
                                  meta::separation_loss()),
                  Error);
}

TEST_CASE("first-order and exact gradients mostly agree on a tiny model") {
  auto cfg_model = tasnet::ModelConfig::tiny();
  int positive = 0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto params = tasnet::init_params(cfg_model, 100 + seed);
    std::vector<meta::Task> tasks = {random_task(500 + seed * 7)};

    meta::MetaConfig cfg;
    cfg.alpha = 0.01;
    auto fo = meta_gradient(params, tasks, cfg, meta::separation_loss());
    cfg.meta_grad_mode = meta::MetaGradMode::kFiniteDifferenceExact;
    auto ex = meta_gradient(params, tasks, cfg, meta::separation_loss());

    double dot = 0.0, nfo = 0.0, nex = 0.0;
    for (std::size_t i = 0; i < fo.size(); ++i) {
      dot += fo[i] * ex[i];
      nfo += fo[i] * fo[i];
      nex += ex[i] * ex[i];
    }
    const double cosine = dot / std::sqrt(nfo * nex);
    if (cosine > 0.0) ++positive;
  }
  CHECK(positive >= 9);
}

TEST_CASE("finetune equals inner_adapt bit for bit") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 31);
  auto ex = random_example(600);
  meta::MetaConfig cfg;
  cfg.alpha = 0.01;
  cfg.partition = tasnet::Partition::kSeparatorOnly;

  auto tuned = meta::finetune(params, {ex}, cfg, meta::separation_loss());
  auto adapted =
      meta::inner_adapt(params, {ex}, cfg, meta::separation_loss()).params;
  CHECK(bit_equal(tuned, adapted));
}

TEST_CASE("finetune enforces the one-shot contract") {
  auto params = probe_params(0.0, 0.0);
  meta::MetaConfig cfg;
  cfg.alpha = 0.1;
  std::vector<meta::Example> two = {probe_example(1.0), probe_example(2.0)};
  CHECK_THROWS_AS(meta::finetune(params, two, cfg, probe_loss()), Error);

  cfg.allow_multi_shot_finetune = true;
  CHECK_NOTHROW(meta::finetune(params, two, cfg, probe_loss()));
}

TEST_CASE("multitask_step degenerate and equivalence cases") {
  auto params = probe_params(0.2, 0.6);

  auto frozen =
      meta::multitask_step(params, {probe_example(1.0)}, 0.0, probe_loss());
  CHECK(bit_equal(params, frozen));

  double loss_out = 0.0;
  auto stepped = meta::multitask_step(params, {probe_example(1.0)}, 0.1,
                                      probe_loss(), &loss_out);
  CHECK_EQ(loss_out,
           doctest::Approx(0.5 * 0.64 + 0.5 * 0.16).epsilon(1e-12));

  meta::MetaConfig cfg;
  cfg.alpha = 0.1;
  auto adapted = meta::inner_adapt(params, {probe_example(1.0)}, cfg,
                                   probe_loss());
  CHECK(bit_equal(stepped, adapted.params));
}

TEST_CASE("multitask overfits one tiny mixture") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 32);
  auto ex = random_example(700);
  const auto loss = meta::separation_loss();

  double initial = 0.0, final_loss = 0.0;
  for (int step = 0; step < 50; ++step) {
    double value = 0.0;
    params = meta::multitask_step(params, {ex}, 1e-3, loss, &value);
    if (step == 0) initial = value;
    final_loss = value;
  }
  CHECK(final_loss < initial);
}

TEST_CASE("adam reduces the loss on a fixed batch") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 33);
  std::vector<meta::Example> batch = {random_example(800),
                                      random_example(810)};
  const auto loss = meta::separation_loss();

  const double initial = meta::eval_mean_loss(params, batch, loss);
  meta::AdamOptimizer adam(1e-3);
  for (int step = 0; step < 30; ++step) {
    meta::grad_mean_loss(params, batch, loss);
    adam.step(params);
  }
  CHECK(meta::eval_mean_loss(params, batch, loss) < initial);
}

TEST_CASE("grad_mean_loss returns the same value eval_mean_loss computes") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 34);
  std::vector<meta::Example> batch = {random_example(900)};
  const auto loss = meta::separation_loss();
  const double eval = meta::eval_mean_loss(params, batch, loss);
  auto work = params.clone();
  CHECK_EQ(meta::grad_mean_loss(work, batch, loss), eval);
}

TEST_CASE("meta_step is deterministic") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 35);
  std::vector<meta::Task> tasks = {random_task(950), random_task(960)};
  meta::MetaConfig cfg;
  cfg.alpha = 0.01;
  cfg.beta = 1e-3;
  auto a = meta::meta_step(params, tasks, cfg, meta::separation_loss());
  auto b = meta::meta_step(params, tasks, cfg, meta::separation_loss());
  CHECK(bit_equal(a, b));
}

TEST_CASE("separation_loss validates the reference count") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 36);
  meta::Example ex = random_example(990);
  ex.references.pop_back();
  ag::Tape tape;
  CHECK_THROWS_AS(meta::separation_loss()(tape, params, ex), Error);
}

TEST_CASE("config validation") {
  meta::MetaConfig cfg;
  cfg.alpha = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.inner_steps = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  CHECK_NOTHROW(cfg.validate());
}
