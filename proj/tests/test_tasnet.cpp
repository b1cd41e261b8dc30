// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "metasep/audio.h"
#include "metasep/error.h"
#include "metasep/objective.h"
#include "metasep/ops.h"
#include "metasep/tasnet.h"
#include "metasep/tensor.h"

using metasep::AudioSignal;
using metasep::Error;
namespace ag = metasep::ag;
namespace tasnet = metasep::tasnet;
namespace objective = metasep::objective;

namespace {

AudioSignal random_signal(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.8, 0.8);
  AudioSignal s;
  s.samples.resize(n);
  for (double& x : s.samples) x = dist(rng);
  return s;
}

double group_grad_norm(const tasnet::ModelParams& params,
                       const std::string& prefix) {
  double acc = 0.0;
  for (const auto& [path, tensor] : params.tensors) {
    if (path.rfind(prefix, 0) != 0 || !tensor.has_grad()) continue;
    for (double g : tensor.grad()) acc += g * g;
  }
  return std::sqrt(acc);
}

}  // namespace

TEST_CASE("config validation") {
  tasnet::ModelConfig bad = tasnet::ModelConfig::desk_default();
  bad.num_sources = 1;
  CHECK_THROWS_AS(bad.validate(), Error);

  bad = tasnet::ModelConfig::desk_default();
  bad.stride = 20;
  CHECK_THROWS_AS(bad.validate(), Error);

  CHECK_NOTHROW(tasnet::ModelConfig::desk_default().validate());
  CHECK_NOTHROW(tasnet::ModelConfig::tiny().validate());
}

TEST_CASE("parameter count is a pure function of the config") {
  // Tallied by hand from the block structure.
  CHECK_EQ(tasnet::param_count(tasnet::ModelConfig::tiny()), 176);
  CHECK_EQ(tasnet::param_count(tasnet::ModelConfig::desk_default()), 62112);

  for (auto cfg :
       {tasnet::ModelConfig::tiny(), tasnet::ModelConfig::desk_default()}) {
    auto params = tasnet::init_params(cfg, 1);
    CHECK_EQ(params.total_values(), tasnet::param_count(cfg));
    CHECK_EQ(params.tensors.size(), tasnet::tensor_spec(cfg).size());
  }
}

TEST_CASE("partition algebra") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 2);
  auto whole = tasnet::partition_tensors(params, tasnet::Partition::kWholeModel);
  auto sep = tasnet::partition_tensors(params, tasnet::Partition::kSeparatorOnly);
  auto ae =
      tasnet::partition_tensors(params, tasnet::Partition::kAutoencoderOnly);

  CHECK_EQ(whole.size(), params.tensors.size());
  CHECK_EQ(sep.size() + ae.size(), whole.size());

  std::set<std::string> sep_set(sep.begin(), sep.end());
  for (const auto& path : ae) CHECK_EQ(sep_set.count(path), 0);
  for (const auto& path : sep) {
    CHECK_EQ(path.rfind("separator/", 0), 0);
  }
  for (const auto& path : ae) {
    CHECK((path.rfind("encoder/", 0) == 0 || path.rfind("decoder/", 0) == 0));
  }
}

TEST_CASE("partition names round trip") {
  for (auto p :
       {tasnet::Partition::kWholeModel, tasnet::Partition::kSeparatorOnly,
        tasnet::Partition::kAutoencoderOnly}) {
    CHECK_EQ(tasnet::partition_from_name(tasnet::partition_name(p)), p);
  }
  CHECK_THROWS_AS(tasnet::partition_from_name("everything"), Error);
}

TEST_CASE("init is deterministic and bounded") {
  auto cfg = tasnet::ModelConfig::tiny();
  auto a = tasnet::init_params(cfg, 42);
  auto b = tasnet::init_params(cfg, 42);
  auto c = tasnet::init_params(cfg, 43);

  bool all_equal = true, any_differs = false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i) {
    auto av = a.tensors[i].second.values();
    auto bv = b.tensors[i].second.values();
    auto cv = c.tensors[i].second.values();
    for (std::size_t j = 0; j < av.size(); ++j) {
      all_equal = all_equal && av[j] == bv[j];
      any_differs = any_differs || av[j] != cv[j];
    }
  }
  CHECK(all_equal);
  CHECK(any_differs);

  // Encoder kernel: fan-in 1*4, so |v| <= 0.5.
  for (double v : a.at("encoder/conv/weight").values()) {
    CHECK(std::abs(v) <= 0.5);
  }
  for (double v : a.at("separator/norm_in/gain").values()) CHECK_EQ(v, 1.0);
  for (double v : a.at("separator/norm_in/bias").values()) CHECK_EQ(v, 0.0);
  for (double v : a.at("separator/prelu_out/slope").values()) {
    CHECK_EQ(v, 0.25);
  }
}

TEST_CASE("encode shapes and zero input") {
  auto params = tasnet::init_params(tasnet::ModelConfig::desk_default(), 3);
  ag::Tape tape;

  ag::Tensor h = tasnet::encode(
      tape, params, tasnet::signal_tensor(random_signal(8000, 4)));
  CHECK_EQ(h.shape(), ag::Shape{64, 999});

  ag::Tensor one = tasnet::encode(
      tape, params, tasnet::signal_tensor(random_signal(16, 5)));
  CHECK_EQ(one.shape(), ag::Shape{64, 1});

  AudioSignal zero;
  zero.samples.assign(64, 0.0);
  ag::Tensor hz = tasnet::encode(tape, params, tasnet::signal_tensor(zero));
  for (double v : hz.values()) CHECK_EQ(v, 0.0);

  CHECK_THROWS_AS(
      tasnet::encode(tape, params, tasnet::signal_tensor(random_signal(8, 6))),
      Error);
}

TEST_CASE("separate emits C masks in [0,1] that differ") {
  auto cfg = tasnet::ModelConfig::tiny();
  auto params = tasnet::init_params(cfg, 7);
  ag::Tape tape;
  ag::Tensor h = tasnet::encode(
      tape, params, tasnet::signal_tensor(random_signal(64, 8)));

  auto masks = tasnet::separate(tape, params, h);
  REQUIRE_EQ(masks.size(), 2);
  double max_pair_diff = 0.0;
  for (const auto& m : masks) {
    CHECK_EQ(m.shape(), h.shape());
    for (double v : m.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  for (std::int64_t i = 0; i < masks[0].numel(); ++i) {
    max_pair_diff = std::max(
        max_pair_diff, std::abs(masks[0].values()[i] - masks[1].values()[i]));
  }
  CHECK(max_pair_diff > 0.0);
}

TEST_CASE("apply_mask is an elementwise product") {
  ag::Tape tape;
  ag::Tensor h = ag::Tensor::from_values({1, 2}, {2.0, 3.0});
  ag::Tensor ones = ag::Tensor::from_values({1, 2}, {1.0, 1.0});
  ag::Tensor zeros = ag::Tensor::from_values({1, 2}, {0.0, 0.0});
  ag::Tensor half = ag::Tensor::from_values({1, 2}, {0.5, 1.0});

  auto same = tasnet::apply_mask(tape, h, ones);
  CHECK_EQ(same.values()[0], 2.0);
  CHECK_EQ(same.values()[1], 3.0);
  auto zeroed = tasnet::apply_mask(tape, h, zeros);
  for (double v : zeroed.values()) CHECK_EQ(v, 0.0);
  auto prod = tasnet::apply_mask(tape, h, half);
  CHECK_EQ(prod.values()[0], 1.0);
  CHECK_EQ(prod.values()[1], 3.0);
}

TEST_CASE("decode length and linearity at zero") {
  auto params = tasnet::init_params(tasnet::ModelConfig::desk_default(), 9);
  ag::Tape tape;
  ag::Tensor d = ag::Tensor::leaf({64, 999});
  ag::Tensor wave = tasnet::decode(tape, params, d);
  CHECK_EQ(wave.shape(), ag::Shape{1, 8000});
  for (double v : wave.values()) CHECK_EQ(v, 0.0);
}

TEST_CASE("forward returns C trimmed sources, deterministically") {
  auto cfg = tasnet::ModelConfig::tiny();
  auto params = tasnet::init_params(cfg, 10);
  AudioSignal mix = random_signal(128, 11);

  ag::Tape t1, t2;
  auto est1 = tasnet::forward(t1, params, tasnet::signal_tensor(mix));
  auto est2 = tasnet::forward(t2, params, tasnet::signal_tensor(mix));
  REQUIRE_EQ(est1.size(), 2);
  for (std::size_t c = 0; c < est1.size(); ++c) {
    CHECK_EQ(est1[c].shape(), ag::Shape{1, 128});
    CHECK(est1[c].all_finite());
    for (std::int64_t i = 0; i < est1[c].numel(); ++i) {
      CHECK_EQ(est1[c].values()[i], est2[c].values()[i]);
    }
  }
}

TEST_CASE("separate_signal matches forward") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 12);
  AudioSignal mix = random_signal(96, 13);

  auto sigs = tasnet::separate_signal(params, mix);
  ag::Tape tape;
  auto nodes = tasnet::forward(tape, params, tasnet::signal_tensor(mix));
  REQUIRE_EQ(sigs.size(), nodes.size());
  for (std::size_t c = 0; c < sigs.size(); ++c) {
    REQUIRE_EQ(sigs[c].samples.size(), 96);
    CHECK_EQ(sigs[c].sample_rate, mix.sample_rate);
    for (std::size_t i = 0; i < sigs[c].samples.size(); ++i) {
      CHECK_EQ(sigs[c].samples[i], nodes[c].values()[i]);
    }
  }
}

TEST_CASE("every parameter group receives gradient") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 14);
  ag::Tape tape;
  auto est = tasnet::forward(tape, params,
                             tasnet::signal_tensor(random_signal(64, 15)));
  ag::Tensor loss = ag::sum(tape, ag::mul(tape, est[0], est[0]));
  tape.backward(loss);

  CHECK(group_grad_norm(params, "encoder/") > 0.0);
  CHECK(group_grad_norm(params, "separator/") > 0.0);
  CHECK(group_grad_norm(params, "decoder/") > 0.0);
}

TEST_CASE("tiny model loss passes finite differences for every tensor") {
  auto cfg = tasnet::ModelConfig::tiny();
  auto base = tasnet::init_params(cfg, 16);
  AudioSignal mix = random_signal(32, 17);
  std::vector<ag::Tensor> refs = {
      ag::Tensor::vector(random_signal(32, 18).samples),
      ag::Tensor::vector(random_signal(32, 19).samples)};

  for (const auto& [path, tensor] : base.tensors) {
    auto fn = [&, path = path](ag::Tape& tape, const ag::Tensor& p) {
      tasnet::ModelParams probe = base.clone();
      probe.at(path) = p;
      auto est = tasnet::forward(tape, probe, tasnet::signal_tensor(mix));
      return objective::upit_loss(tape, est, refs).node;
    };
    const double err = ag::finite_difference_check(fn, tensor, 1e-5);
    INFO("tensor ", path);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("checkpoint round trip is bit-exact") {
  namespace fs = std::filesystem;
  auto cfg = tasnet::ModelConfig::tiny();
  auto params = tasnet::init_params(cfg, 20);
  const std::string path =
      (fs::temp_directory_path() / "metasep_ckpt_test.bin").string();

  tasnet::save_checkpoint(path, params);
  auto loaded = tasnet::load_checkpoint(path);

  CHECK_EQ(loaded.config.encoder_channels, cfg.encoder_channels);
  CHECK_EQ(loaded.config.num_sources, cfg.num_sources);
  REQUIRE_EQ(loaded.tensors.size(), params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    CHECK_EQ(loaded.tensors[i].first, params.tensors[i].first);
    auto a = params.tensors[i].second.values();
    auto b = loaded.tensors[i].second.values();
    REQUIRE_EQ(a.size(), b.size());
    for (std::size_t j = 0; j < a.size(); ++j) CHECK_EQ(a[j], b[j]);
  }

  // Saving the loaded model reproduces the file byte for byte.
  const std::string path2 =
      (fs::temp_directory_path() / "metasep_ckpt_test2.bin").string();
  tasnet::save_checkpoint(path2, loaded);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string b2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK_EQ(b1, b2);
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("checkpoint load rejects junk") {
  namespace fs = std::filesystem;
  const std::string path =
      (fs::temp_directory_path() / "metasep_ckpt_junk.bin").string();
  std::ofstream(path, std::ios::binary) << "not a checkpoint";
  CHECK_THROWS_AS(tasnet::load_checkpoint(path), Error);
  fs::remove(path);
  CHECK_THROWS_AS(tasnet::load_checkpoint(path), Error);
}

TEST_CASE("clone detaches storage") {
  auto params = tasnet::init_params(tasnet::ModelConfig::tiny(), 21);
  auto copy = params.clone();
  copy.at("encoder/conv/weight").values()[0] += 1.0;
  CHECK(params.at("encoder/conv/weight").values()[0] !=
        copy.at("encoder/conv/weight").values()[0]);
}
