// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metasep/tasnet.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>

#include "metasep/error.h"

namespace metasep::tasnet {

namespace {

constexpr double kNormEpsilon = 1e-8;
constexpr char kCheckpointMagic[4] = {'M', 'S', 'E', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace

void ModelConfig::validate() const {
  MS_CHECK(num_sources >= 2, "num_sources must be >= 2, got ", num_sources);
  MS_CHECK(encoder_channels > 0, "encoder_channels must be positive");
  MS_CHECK(kernel_len > 0, "kernel_len must be positive");
  MS_CHECK(stride > 0 && stride <= kernel_len,
           "stride must be in [1, kernel_len], got stride=", stride,
           " kernel_len=", kernel_len);
  MS_CHECK(bottleneck_channels > 0, "bottleneck_channels must be positive");
  MS_CHECK(hidden_channels > 0, "hidden_channels must be positive");
  MS_CHECK(depthwise_kernel > 0 && depthwise_kernel % 2 == 1,
           "depthwise_kernel must be odd and positive, got ",
           depthwise_kernel);
  MS_CHECK(blocks_per_repeat > 0, "blocks_per_repeat must be positive");
  MS_CHECK(repeats > 0, "repeats must be positive");
  MS_CHECK(sample_rate > 0, "sample_rate must be positive");
}

ModelConfig ModelConfig::tiny() {
  ModelConfig cfg;
  cfg.num_sources = 2;
  cfg.encoder_channels = 4;
  cfg.kernel_len = 4;
  cfg.stride = 2;
  cfg.bottleneck_channels = 4;
  cfg.hidden_channels = 4;
  cfg.depthwise_kernel = 3;
  cfg.blocks_per_repeat = 1;
  cfg.repeats = 1;
  cfg.sample_rate = 8000;
  return cfg;
}

const char* partition_name(Partition p) {
  switch (p) {
    case Partition::kWholeModel:
      return "whole_model";
    case Partition::kSeparatorOnly:
      return "separator_only";
    case Partition::kAutoencoderOnly:
      return "autoencoder_only";
  }
  fail("unknown partition value");
}

Partition partition_from_name(const std::string& name) {
  if (name == "whole_model") return Partition::kWholeModel;
  if (name == "separator_only") return Partition::kSeparatorOnly;
  if (name == "autoencoder_only") return Partition::kAutoencoderOnly;
  fail("unknown partition name \"", name,
       "\", expected whole_model | separator_only | autoencoder_only");
}

std::vector<std::string> partition_prefixes(Partition p) {
  switch (p) {
    case Partition::kWholeModel:
      return {""};
    case Partition::kSeparatorOnly:
      return {"separator/"};
    case Partition::kAutoencoderOnly:
      return {"encoder/", "decoder/"};
  }
  fail("unknown partition value");
}

bool path_in_partition(const std::string& path, Partition p) {
  for (const std::string& prefix : partition_prefixes(p)) {
    if (path.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

bool ModelParams::has(const std::string& path) const {
  for (const auto& [name, tensor] : tensors) {
    if (name == path) return true;
  }
  return false;
}

ag::Tensor& ModelParams::at(const std::string& path) {
  for (auto& [name, tensor] : tensors) {
    if (name == path) return tensor;
  }
  fail("model has no tensor at path \"", path, "\"");
}

const ag::Tensor& ModelParams::at(const std::string& path) const {
  for (const auto& [name, tensor] : tensors) {
    if (name == path) return tensor;
  }
  fail("model has no tensor at path \"", path, "\"");
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  copy.config = config;
  copy.tensors.reserve(tensors.size());
  for (const auto& [name, tensor] : tensors) {
    copy.tensors.emplace_back(name, tensor.clone());
  }
  return copy;
}

std::int64_t ModelParams::total_values() const {
  std::int64_t n = 0;
  for (const auto& [name, tensor] : tensors) n += tensor.numel();
  return n;
}

void ModelParams::zero_grads() {
  for (auto& [name, tensor] : tensors) tensor.drop_grad();
}

std::vector<std::pair<std::string, ag::Shape>> tensor_spec(
    const ModelConfig& cfg) {
  cfg.validate();
  const std::int64_t c = cfg.num_sources;
  const std::int64_t d = cfg.encoder_channels;
  const std::int64_t l = cfg.kernel_len;
  const std::int64_t b = cfg.bottleneck_channels;
  const std::int64_t h = cfg.hidden_channels;
  const std::int64_t p = cfg.depthwise_kernel;

  std::vector<std::pair<std::string, ag::Shape>> spec;
  spec.emplace_back("encoder/conv/weight", ag::Shape{d, 1, l});
  spec.emplace_back("separator/norm_in/gain", ag::Shape{d});
  spec.emplace_back("separator/norm_in/bias", ag::Shape{d});
  spec.emplace_back("separator/bottleneck/weight", ag::Shape{b, d, 1});
  for (std::int64_t r = 0; r < cfg.repeats; ++r) {
    for (std::int64_t x = 0; x < cfg.blocks_per_repeat; ++x) {
      const std::string base = concat("separator/tcn/r", r, "/x", x, "/");
      spec.emplace_back(base + "conv_in/weight", ag::Shape{h, b, 1});
      spec.emplace_back(base + "prelu1/slope", ag::Shape{h});
      spec.emplace_back(base + "norm1/gain", ag::Shape{h});
      spec.emplace_back(base + "norm1/bias", ag::Shape{h});
      spec.emplace_back(base + "dconv/weight", ag::Shape{h, 1, p});
      spec.emplace_back(base + "prelu2/slope", ag::Shape{h});
      spec.emplace_back(base + "norm2/gain", ag::Shape{h});
      spec.emplace_back(base + "norm2/bias", ag::Shape{h});
      spec.emplace_back(base + "res/weight", ag::Shape{b, h, 1});
      spec.emplace_back(base + "skip/weight", ag::Shape{b, h, 1});
    }
  }
  spec.emplace_back("separator/prelu_out/slope", ag::Shape{b});
  spec.emplace_back("separator/mask/weight", ag::Shape{c * d, b, 1});
  spec.emplace_back("decoder/deconv/weight", ag::Shape{d, 1, l});
  return spec;
}

std::int64_t param_count(const ModelConfig& cfg) {
  std::int64_t n = 0;
  for (const auto& [path, shape] : tensor_spec(cfg)) {
    n += ag::shape_numel(shape);
  }
  return n;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ModelParams params;
  params.config = cfg;
  for (const auto& [path, shape] : tensor_spec(cfg)) {
    const std::int64_t n = ag::shape_numel(shape);
    std::vector<double> values(static_cast<std::size_t>(n));
    if (path.find("/gain") != std::string::npos) {
      std::fill(values.begin(), values.end(), 1.0);
    } else if (path.find("/bias") != std::string::npos) {
      std::fill(values.begin(), values.end(), 0.0);
    } else if (path.find("/slope") != std::string::npos) {
      std::fill(values.begin(), values.end(), 0.25);
    } else {
      // Convolution kernel [C_out x C_in_per_group x L]: fan-in is the
      // receptive volume of one output unit.
      const double fan_in = static_cast<double>(shape[1] * shape[2]);
      const double bound = 1.0 / std::sqrt(fan_in);
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (double& v : values) v = dist(rng);
    }
    params.tensors.emplace_back(
        path, ag::Tensor::from_values(shape, std::move(values), true));
  }
  return params;
}

std::vector<std::string> partition_tensors(const ModelParams& params,
                                           Partition p) {
  std::vector<std::string> out;
  for (const auto& [name, tensor] : params.tensors) {
    if (path_in_partition(name, p)) out.push_back(name);
  }
  return out;
}

ag::Tensor signal_tensor(const AudioSignal& signal) {
  MS_CHECK(!signal.samples.empty(), "cannot build a tensor from empty audio");
  return ag::Tensor::from_values(
      {1, static_cast<std::int64_t>(signal.samples.size())}, signal.samples,
      false);
}

ag::Tensor encode(ag::Tape& tape, const ModelParams& params,
                  const ag::Tensor& mixture) {
  const ModelConfig& cfg = params.config;
  MS_CHECK(mixture.rank() == 2 && mixture.dim(0) == 1,
           "encoder expects a [1 x T] input, got ", ag::shape_str(mixture.shape()));
  MS_CHECK(mixture.dim(1) >= cfg.kernel_len, "input of ", mixture.dim(1),
           " samples is shorter than one encoder window of ", cfg.kernel_len);
  ag::Conv1dOpts opts;
  opts.stride = cfg.stride;
  ag::Tensor frames =
      ag::conv1d(tape, mixture, params.at("encoder/conv/weight"), opts);
  return ag::relu(tape, frames);
}

std::vector<ag::Tensor> separate(ag::Tape& tape, const ModelParams& params,
                                 const ag::Tensor& h) {
  const ModelConfig& cfg = params.config;
  MS_CHECK(h.rank() == 2 && h.dim(0) == cfg.encoder_channels,
           "separator expects [", cfg.encoder_channels, " x T'] features, got ",
           ag::shape_str(h.shape()));

  ag::Tensor y = ag::global_layer_norm(tape, h, params.at("separator/norm_in/gain"),
                                       params.at("separator/norm_in/bias"),
                                       kNormEpsilon);
  y = ag::conv1d(tape, y, params.at("separator/bottleneck/weight"), {});

  ag::Tensor skip_sum;
  bool have_skip = false;
  for (std::int64_t r = 0; r < cfg.repeats; ++r) {
    for (std::int64_t x = 0; x < cfg.blocks_per_repeat; ++x) {
      const std::string base = concat("separator/tcn/r", r, "/x", x, "/");
      const std::int64_t dilation = std::int64_t{1} << x;

      ag::Tensor z = ag::conv1d(tape, y, params.at(base + "conv_in/weight"), {});
      z = ag::prelu(tape, z, params.at(base + "prelu1/slope"));
      z = ag::global_layer_norm(tape, z, params.at(base + "norm1/gain"),
                                params.at(base + "norm1/bias"), kNormEpsilon);

      // Symmetric padding keeps the frame count constant through the
      // dilated depthwise convolution.
      const std::int64_t pad = (cfg.depthwise_kernel - 1) * dilation / 2;
      z = ag::pad_time(tape, z, pad, pad);
      ag::Conv1dOpts dopts;
      dopts.dilation = dilation;
      dopts.groups = cfg.hidden_channels;
      z = ag::conv1d(tape, z, params.at(base + "dconv/weight"), dopts);

      z = ag::prelu(tape, z, params.at(base + "prelu2/slope"));
      z = ag::global_layer_norm(tape, z, params.at(base + "norm2/gain"),
                                params.at(base + "norm2/bias"), kNormEpsilon);

      ag::Tensor res = ag::conv1d(tape, z, params.at(base + "res/weight"), {});
      ag::Tensor skip = ag::conv1d(tape, z, params.at(base + "skip/weight"), {});
      y = ag::add(tape, y, res);
      skip_sum = have_skip ? ag::add(tape, skip_sum, skip) : skip;
      have_skip = true;
    }
  }

  ag::Tensor out = ag::prelu(tape, skip_sum, params.at("separator/prelu_out/slope"));
  out = ag::conv1d(tape, out, params.at("separator/mask/weight"), {});
  out = ag::sigmoid(tape, out);

  std::vector<ag::Tensor> masks;
  masks.reserve(static_cast<std::size_t>(cfg.num_sources));
  for (std::int64_t c = 0; c < cfg.num_sources; ++c) {
    masks.push_back(ag::slice_channels(tape, out, c * cfg.encoder_channels,
                                       cfg.encoder_channels));
  }
  return masks;
}

ag::Tensor apply_mask(ag::Tape& tape, const ag::Tensor& h,
                      const ag::Tensor& mask) {
  return ag::mul(tape, h, mask);
}

ag::Tensor decode(ag::Tape& tape, const ModelParams& params,
                  const ag::Tensor& features) {
  const ModelConfig& cfg = params.config;
  MS_CHECK(features.rank() == 2 && features.dim(0) == cfg.encoder_channels,
           "decoder expects [", cfg.encoder_channels, " x T'] features, got ",
           ag::shape_str(features.shape()));
  return ag::conv1d_transpose(tape, features,
                              params.at("decoder/deconv/weight"), cfg.stride);
}

std::vector<ag::Tensor> forward(ag::Tape& tape, const ModelParams& params,
                                const ag::Tensor& mixture) {
  const std::int64_t t = mixture.dim(1);
  ag::Tensor h = encode(tape, params, mixture);
  std::vector<ag::Tensor> masks = separate(tape, params, h);
  std::vector<ag::Tensor> sources;
  sources.reserve(masks.size());
  for (const ag::Tensor& mask : masks) {
    ag::Tensor d = apply_mask(tape, h, mask);
    ag::Tensor wave = decode(tape, params, d);
    // Overlap-add reconstruction can run a few samples past the input; the
    // estimate is the left-aligned prefix.
    MS_CHECK(wave.dim(1) >= t, "decoded length ", wave.dim(1),
             " is shorter than the input length ", t);
    sources.push_back(ag::slice_time(tape, wave, 0, t));
  }
  return sources;
}

std::vector<AudioSignal> separate_signal(const ModelParams& params,
                                         const AudioSignal& mixture) {
  ag::Tape tape;
  std::vector<ag::Tensor> sources =
      forward(tape, params, signal_tensor(mixture));
  std::vector<AudioSignal> out;
  out.reserve(sources.size());
  for (const ag::Tensor& s : sources) {
    AudioSignal sig;
    sig.sample_rate = mixture.sample_rate;
    auto sv = s.values();
    sig.samples.assign(sv.begin(), sv.end());
    out.push_back(std::move(sig));
  }
  return out;
}

namespace {

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_i64(std::ostream& os, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  write_i64(os, static_cast<std::int64_t>(u));
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  MS_CHECK(is.good(), "checkpoint truncated while reading ", what);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

std::int64_t read_i64(std::istream& is, const char* what) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  MS_CHECK(is.good(), "checkpoint truncated while reading ", what);
  std::uint64_t u = 0;
  for (int i = 0; i < 8; ++i) u |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<std::int64_t>(u);
}

double read_f64(std::istream& is, const char* what) {
  std::uint64_t u = static_cast<std::uint64_t>(read_i64(is, what));
  double v;
  std::memcpy(&v, &u, 8);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params) {
  std::ofstream os(path, std::ios::binary);
  MS_CHECK(os.is_open(), "cannot open checkpoint for writing: ", path);
  os.write(kCheckpointMagic, 4);
  write_u32(os, kCheckpointVersion);

  const ModelConfig& c = params.config;
  write_i64(os, c.num_sources);
  write_i64(os, c.encoder_channels);
  write_i64(os, c.kernel_len);
  write_i64(os, c.stride);
  write_i64(os, c.bottleneck_channels);
  write_i64(os, c.hidden_channels);
  write_i64(os, c.depthwise_kernel);
  write_i64(os, c.blocks_per_repeat);
  write_i64(os, c.repeats);
  write_i64(os, c.sample_rate);

  write_i64(os, static_cast<std::int64_t>(params.tensors.size()));
  for (const auto& [name, tensor] : params.tensors) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(tensor.rank()));
    for (int axis = 0; axis < tensor.rank(); ++axis) {
      write_i64(os, tensor.dim(axis));
    }
    for (double v : tensor.values()) write_f64(os, v);
  }
  MS_CHECK(os.good(), "write failed for checkpoint: ", path);
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  MS_CHECK(is.is_open(), "cannot open checkpoint: ", path);

  char magic[4];
  is.read(magic, 4);
  MS_CHECK(is.good() && std::memcmp(magic, kCheckpointMagic, 4) == 0,
           "not a model checkpoint: ", path);
  const std::uint32_t version = read_u32(is, "version");
  MS_CHECK(version == kCheckpointVersion, "unsupported checkpoint version ",
           version, " in ", path, ", this build reads version ",
           kCheckpointVersion);

  ModelParams params;
  ModelConfig& c = params.config;
  c.num_sources = read_i64(is, "num_sources");
  c.encoder_channels = read_i64(is, "encoder_channels");
  c.kernel_len = read_i64(is, "kernel_len");
  c.stride = read_i64(is, "stride");
  c.bottleneck_channels = read_i64(is, "bottleneck_channels");
  c.hidden_channels = read_i64(is, "hidden_channels");
  c.depthwise_kernel = read_i64(is, "depthwise_kernel");
  c.blocks_per_repeat = read_i64(is, "blocks_per_repeat");
  c.repeats = read_i64(is, "repeats");
  c.sample_rate = static_cast<int>(read_i64(is, "sample_rate"));
  c.validate();

  const std::int64_t count = read_i64(is, "tensor count");
  MS_CHECK(count > 0 && count < 1'000'000, "implausible tensor count ", count,
           " in ", path);
  for (std::int64_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = read_u32(is, "tensor name length");
    MS_CHECK(name_len > 0 && name_len < 4096, "implausible tensor name length ",
             name_len, " in ", path);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    MS_CHECK(is.good(), "checkpoint truncated while reading a tensor name");
    const std::uint32_t rank = read_u32(is, "tensor rank");
    MS_CHECK(rank >= 1 && rank <= 4, "implausible tensor rank ", rank, " for ",
             name);
    ag::Shape shape(rank);
    for (std::uint32_t axis = 0; axis < rank; ++axis) {
      shape[axis] = read_i64(is, "tensor extent");
    }
    const std::int64_t n = ag::shape_numel(shape);
    std::vector<double> values(static_cast<std::size_t>(n));
    for (double& v : values) v = read_f64(is, "tensor values");
    params.tensors.emplace_back(
        name, ag::Tensor::from_values(shape, std::move(values), true));
  }

  // The stored tensor set must be exactly the set the config implies.
  auto spec = tensor_spec(c);
  MS_CHECK(spec.size() == params.tensors.size(), "checkpoint ", path,
           " holds ", params.tensors.size(), " tensors, config implies ",
           spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) {
    MS_CHECK(spec[i].first == params.tensors[i].first, "checkpoint tensor ", i,
             " is \"", params.tensors[i].first, "\", expected \"",
             spec[i].first, "\"");
    MS_CHECK(spec[i].second == params.tensors[i].second.shape(),
             "checkpoint tensor \"", spec[i].first, "\" has shape ",
             ag::shape_str(params.tensors[i].second.shape()), ", expected ",
             ag::shape_str(spec[i].second));
  }
  return params;
}

}  // namespace metasep::tasnet
