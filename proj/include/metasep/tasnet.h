// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef METASEP_TASNET_H_
#define METASEP_TASNET_H_

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "metasep/audio.h"
#include "metasep/ops.h"
#include "metasep/tensor.h"

namespace metasep::tasnet {

// Structural hyperparameters of the separation model. The desk-scale default
// keeps every structural element (bottleneck, dilated depthwise blocks,
// residual+skip paths, sigmoid mask head) at a size that trains in minutes on
// a CPU; full-size values stay configurable.
struct ModelConfig {
  std::int64_t num_sources = 2;         // C
  std::int64_t encoder_channels = 64;   // D
  std::int64_t kernel_len = 16;         // L, samples
  std::int64_t stride = 8;              // L/2
  std::int64_t bottleneck_channels = 32;  // B
  std::int64_t hidden_channels = 64;    // H
  std::int64_t depthwise_kernel = 3;    // P
  std::int64_t blocks_per_repeat = 4;   // X
  std::int64_t repeats = 2;             // R
  int sample_rate = 8000;

  void validate() const;

  static ModelConfig desk_default() { return {}; }
  // Small enough for finite-difference checks over the whole loss.
  static ModelConfig tiny();
};

enum class Partition { kWholeModel, kSeparatorOnly, kAutoencoderOnly };

const char* partition_name(Partition p);
Partition partition_from_name(const std::string& name);
// Path prefixes selected by a partition; "" matches everything.
std::vector<std::string> partition_prefixes(Partition p);
bool path_in_partition(const std::string& path, Partition p);

// All trainable tensors, each named by a stable path string whose first
// component (encoder/, separator/, decoder/) is its parameter group.
struct ModelParams {
  ModelConfig config;
  std::vector<std::pair<std::string, ag::Tensor>> tensors;

  bool has(const std::string& path) const;
  ag::Tensor& at(const std::string& path);
  const ag::Tensor& at(const std::string& path) const;

  ModelParams clone() const;
  std::int64_t total_values() const;
  void zero_grads();
};

// Tensor paths and shapes as a pure function of the config.
std::vector<std::pair<std::string, ag::Shape>> tensor_spec(
    const ModelConfig& cfg);
std::int64_t param_count(const ModelConfig& cfg);

// Kernels uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; norm gains 1, biases 0,
// PReLU slopes 0.25. Deterministic under seed.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

std::vector<std::string> partition_tensors(const ModelParams& params,
                                           Partition p);

// Wraps a waveform as a [1 x T] constant.
ag::Tensor signal_tensor(const AudioSignal& signal);

ag::Tensor encode(ag::Tape& tape, const ModelParams& params,
                  const ag::Tensor& mixture);
std::vector<ag::Tensor> separate(ag::Tape& tape, const ModelParams& params,
                                 const ag::Tensor& h);
ag::Tensor apply_mask(ag::Tape& tape, const ag::Tensor& h,
                      const ag::Tensor& mask);
ag::Tensor decode(ag::Tape& tape, const ModelParams& params,
                  const ag::Tensor& features);

// encode -> separate -> mask -> decode, trimmed back to the input length.
// Returns C waveforms of shape [1 x T].
std::vector<ag::Tensor> forward(ag::Tape& tape, const ModelParams& params,
                                const ag::Tensor& mixture);

// Value-only convenience for evaluation.
std::vector<AudioSignal> separate_signal(const ModelParams& params,
                                         const AudioSignal& mixture);

// Versioned checkpoint container; load(save(p)) is bit-exact.
void save_checkpoint(const std::string& path, const ModelParams& params);
ModelParams load_checkpoint(const std::string& path);

}  // namespace metasep::tasnet

#endif  // METASEP_TASNET_H_
