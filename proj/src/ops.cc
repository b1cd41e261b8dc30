// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metasep/ops.h"

#include <cmath>

#include "metasep/error.h"

namespace metasep::ag {

namespace {

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  MS_CHECK(a.shape() == b.shape(), op, ": shape mismatch ",
           shape_str(a.shape()), " vs ", shape_str(b.shape()));
}

double stable_sigmoid(double v) {
  if (v >= 0.0) {
    const double z = std::exp(-v);
    return 1.0 / (1.0 + z);
  }
  const double z = std::exp(v);
  return z / (1.0 + z);
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("add", a, b);
  const bool track = a.requires_grad() || b.requires_grad();
  Tensor out = Tensor::leaf(a.shape(), track);
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + bv[i];
  if (track) {
    tape.record([a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  }
  return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("sub", a, b);
  const bool track = a.requires_grad() || b.requires_grad();
  Tensor out = Tensor::leaf(a.shape(), track);
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] - bv[i];
  if (track) {
    tape.record([a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("mul", a, b);
  const bool track = a.requires_grad() || b.requires_grad();
  Tensor out = Tensor::leaf(a.shape(), track);
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * bv[i];
  if (track) {
    tape.record([a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto av = a.values(), bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
      }
    });
  }
  return out;
}

Tensor divide(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("divide", a, b);
  const bool track = a.requires_grad() || b.requires_grad();
  Tensor out = Tensor::leaf(a.shape(), track);
  auto av = a.values(), bv = b.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    MS_CHECK(bv[i] != 0.0, "divide: zero denominator at index ", i);
    ov[i] = av[i] / bv[i];
  }
  if (track) {
    tape.record([a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto av = a.values(), bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < g.size(); ++i)
          gb[i] -= g[i] * av[i] / (bv[i] * bv[i]);
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  const bool track = a.requires_grad();
  Tensor out = Tensor::leaf(a.shape(), track);
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] * factor;
  if (track) {
    tape.record([a = a, out, factor]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * factor;
    });
  }
  return out;
}

Tensor add_scalar(Tape& tape, const Tensor& a, double shift) {
  const bool track = a.requires_grad();
  Tensor out = Tensor::leaf(a.shape(), track);
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] + shift;
  if (track) {
    tape.record([a = a, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return out;
}

Tensor broadcast_mul(Tape& tape, const Tensor& s, const Tensor& x) {
  MS_CHECK(s.numel() == 1, "broadcast_mul: scalar operand has shape ",
           shape_str(s.shape()));
  const bool track = s.requires_grad() || x.requires_grad();
  Tensor out = Tensor::leaf(x.shape(), track);
  const double sv = s.values()[0];
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = sv * xv[i];
  if (track) {
    tape.record([s = s, x = x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xv = x.values();
      const double sv = s.values()[0];
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv;
      }
      if (s.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xv[i];
        s.grad()[0] += acc;
      }
    });
  }
  return out;
}

Tensor broadcast_sub(Tape& tape, const Tensor& x, const Tensor& s) {
  MS_CHECK(s.numel() == 1, "broadcast_sub: scalar operand has shape ",
           shape_str(s.shape()));
  const bool track = s.requires_grad() || x.requires_grad();
  Tensor out = Tensor::leaf(x.shape(), track);
  const double sv = s.values()[0];
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = xv[i] - sv;
  if (track) {
    tape.record([s = s, x = x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (s.requires_grad()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i];
        s.grad()[0] -= acc;
      }
    });
  }
  return out;
}

Tensor sum(Tape& tape, const Tensor& a) {
  const bool track = a.requires_grad();
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Tensor out = Tensor::from_values({1}, {acc}, track);
  if (track) {
    tape.record([a = a, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      auto ga = a.grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& a) {
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(a.numel()));
}

Tensor dot(Tape& tape, const Tensor& a, const Tensor& b) {
  check_same_shape("dot", a, b);
  const bool track = a.requires_grad() || b.requires_grad();
  auto av = a.values(), bv = b.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  Tensor out = Tensor::from_values({1}, {acc}, track);
  if (track) {
    tape.record([a = a, b = b, out]() mutable {
      if (!out.has_grad()) return;
      const double g = out.grad()[0];
      auto av = a.values(), bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
      }
    });
  }
  return out;
}

Tensor log_e(Tape& tape, const Tensor& a) {
  const bool track = a.requires_grad();
  Tensor out = Tensor::leaf(a.shape(), track);
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) {
    MS_CHECK(av[i] > 0.0, "log_e: nonpositive input ", av[i], " at index ", i);
    ov[i] = std::log(av[i]);
  }
  if (track) {
    tape.record([a = a, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto av = a.values();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / av[i];
    });
  }
  return out;
}

Tensor sigmoid(Tape& tape, const Tensor& a) {
  const bool track = a.requires_grad();
  Tensor out = Tensor::leaf(a.shape(), track);
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = stable_sigmoid(av[i]);
  if (track) {
    tape.record([a = a, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto ov = out.values();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] += g[i] * ov[i] * (1.0 - ov[i]);
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& a) {
  const bool track = a.requires_grad();
  Tensor out = Tensor::leaf(a.shape(), track);
  auto av = a.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = av[i] > 0.0 ? av[i] : 0.0;
  if (track) {
    tape.record([a = a, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto av = a.values();
      auto ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (av[i] > 0.0) ga[i] += g[i];
    });
  }
  return out;
}

Tensor prelu(Tape& tape, const Tensor& x, const Tensor& slope) {
  MS_CHECK(x.rank() == 2, "prelu: input must be [C x T], got ",
           shape_str(x.shape()));
  MS_CHECK(slope.rank() == 1 && slope.dim(0) == x.dim(0),
           "prelu: slope shape ", shape_str(slope.shape()),
           " does not match input channels of ", shape_str(x.shape()));
  const auto C = x.dim(0), T = x.dim(1);
  const bool track = x.requires_grad() || slope.requires_grad();
  Tensor out = Tensor::leaf(x.shape(), track);
  auto xv = x.values();
  auto sv = slope.values();
  auto ov = out.values();
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t t = 0; t < T; ++t) {
      const auto i = static_cast<std::size_t>(c * T + t);
      ov[i] = xv[i] > 0.0 ? xv[i] : sv[static_cast<std::size_t>(c)] * xv[i];
    }
  if (track) {
    tape.record([x = x, slope = slope, out, C, T]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xv = x.values();
      auto sv = slope.values();
      for (std::int64_t c = 0; c < C; ++c) {
        double sacc = 0.0;
        for (std::int64_t t = 0; t < T; ++t) {
          const auto i = static_cast<std::size_t>(c * T + t);
          if (xv[i] > 0.0) {
            if (x.requires_grad()) x.grad()[i] += g[i];
          } else {
            if (x.requires_grad())
              x.grad()[i] += g[i] * sv[static_cast<std::size_t>(c)];
            sacc += g[i] * xv[i];
          }
        }
        if (slope.requires_grad())
          slope.grad()[static_cast<std::size_t>(c)] += sacc;
      }
    });
  }
  return out;
}

Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernels,
              const Conv1dOpts& opts) {
  MS_CHECK(input.rank() == 2, "conv1d: input must be [C_in x T], got ",
           shape_str(input.shape()));
  MS_CHECK(kernels.rank() == 3,
           "conv1d: kernels must be [C_out x C_in/groups x L], got ",
           shape_str(kernels.shape()));
  MS_CHECK(opts.stride >= 1 && opts.dilation >= 1 && opts.groups >= 1,
           "conv1d: stride/dilation/groups must be positive, got ", opts.stride,
           "/", opts.dilation, "/", opts.groups);
  const auto c_in = input.dim(0), t_in = input.dim(1);
  const auto c_out = kernels.dim(0), c_per_group = kernels.dim(1),
             len = kernels.dim(2);
  MS_CHECK(c_in % opts.groups == 0 && c_out % opts.groups == 0,
           "conv1d: channels ", c_in, "->", c_out, " not divisible by groups ",
           opts.groups);
  MS_CHECK(c_per_group == c_in / opts.groups,
           "conv1d: input channels of ", shape_str(input.shape()),
           " incompatible with kernels ", shape_str(kernels.shape()),
           " at groups=", opts.groups);
  const auto span = (len - 1) * opts.dilation + 1;
  MS_CHECK(t_in >= span, "conv1d: input length ", t_in,
           " shorter than effective kernel span ", span);

  const auto t_out = (t_in - span) / opts.stride + 1;
  const auto out_per_group = c_out / opts.groups;
  const bool track = input.requires_grad() || kernels.requires_grad();
  Tensor out = Tensor::leaf({c_out, t_out}, track);
  auto xv = input.values();
  auto kv = kernels.values();
  auto ov = out.values();
  for (std::int64_t o = 0; o < c_out; ++o) {
    const auto c_base = (o / out_per_group) * c_per_group;
    for (std::int64_t t = 0; t < t_out; ++t) {
      double acc = 0.0;
      for (std::int64_t c = 0; c < c_per_group; ++c)
        for (std::int64_t l = 0; l < len; ++l)
          acc += kv[static_cast<std::size_t>((o * c_per_group + c) * len + l)] *
                 xv[static_cast<std::size_t>((c_base + c) * t_in +
                                             t * opts.stride + l * opts.dilation)];
      ov[static_cast<std::size_t>(o * t_out + t)] = acc;
    }
  }
  if (track) {
    tape.record([input = input, kernels = kernels, out, opts, c_per_group, out_per_group, len,
                 t_in, t_out, c_out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xv = input.values();
      auto kv = kernels.values();
      const bool gx = input.requires_grad(), gk = kernels.requires_grad();
      for (std::int64_t o = 0; o < c_out; ++o) {
        const auto c_base = (o / out_per_group) * c_per_group;
        for (std::int64_t t = 0; t < t_out; ++t) {
          const double go = g[static_cast<std::size_t>(o * t_out + t)];
          if (go == 0.0) continue;
          for (std::int64_t c = 0; c < c_per_group; ++c)
            for (std::int64_t l = 0; l < len; ++l) {
              const auto ki = static_cast<std::size_t>(
                  (o * c_per_group + c) * len + l);
              const auto xi = static_cast<std::size_t>(
                  (c_base + c) * t_in + t * opts.stride + l * opts.dilation);
              if (gx) input.grad()[xi] += go * kv[ki];
              if (gk) kernels.grad()[ki] += go * xv[xi];
            }
        }
      }
    });
  }
  return out;
}

Tensor conv1d_transpose(Tape& tape, const Tensor& input, const Tensor& kernels,
                        std::int64_t stride) {
  MS_CHECK(input.rank() == 2, "conv1d_transpose: input must be [C_in x T'], got ",
           shape_str(input.shape()));
  MS_CHECK(kernels.rank() == 3,
           "conv1d_transpose: kernels must be [C_in x C_out x L], got ",
           shape_str(kernels.shape()));
  MS_CHECK(stride >= 1, "conv1d_transpose: stride must be positive, got ",
           stride);
  const auto c_in = input.dim(0), t_in = input.dim(1);
  MS_CHECK(kernels.dim(0) == c_in, "conv1d_transpose: input channels of ",
           shape_str(input.shape()), " incompatible with kernels ",
           shape_str(kernels.shape()));
  const auto c_out = kernels.dim(1), len = kernels.dim(2);
  const auto t_out = (t_in - 1) * stride + len;
  const bool track = input.requires_grad() || kernels.requires_grad();
  Tensor out = Tensor::leaf({c_out, t_out}, track);
  auto xv = input.values();
  auto kv = kernels.values();
  auto ov = out.values();
  for (std::int64_t c = 0; c < c_in; ++c)
    for (std::int64_t t = 0; t < t_in; ++t) {
      const double x = xv[static_cast<std::size_t>(c * t_in + t)];
      for (std::int64_t o = 0; o < c_out; ++o)
        for (std::int64_t l = 0; l < len; ++l)
          ov[static_cast<std::size_t>(o * t_out + t * stride + l)] +=
              x * kv[static_cast<std::size_t>((c * c_out + o) * len + l)];
    }
  if (track) {
    tape.record([input = input, kernels = kernels, out, stride, c_in, c_out, len, t_in,
                 t_out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xv = input.values();
      auto kv = kernels.values();
      const bool gx = input.requires_grad(), gk = kernels.requires_grad();
      for (std::int64_t c = 0; c < c_in; ++c)
        for (std::int64_t t = 0; t < t_in; ++t) {
          const auto xi = static_cast<std::size_t>(c * t_in + t);
          double acc = 0.0;
          for (std::int64_t o = 0; o < c_out; ++o)
            for (std::int64_t l = 0; l < len; ++l) {
              const auto ki =
                  static_cast<std::size_t>((c * c_out + o) * len + l);
              const double go =
                  g[static_cast<std::size_t>(o * t_out + t * stride + l)];
              acc += go * kv[ki];
              if (gk) kernels.grad()[ki] += go * xv[xi];
            }
          if (gx) input.grad()[xi] += acc;
        }
    });
  }
  return out;
}

Tensor global_layer_norm(Tape& tape, const Tensor& x, const Tensor& gain,
                         const Tensor& bias, double epsilon) {
  MS_CHECK(x.rank() == 2, "global_layer_norm: input must be [D x T], got ",
           shape_str(x.shape()));
  MS_CHECK(epsilon > 0.0, "global_layer_norm: epsilon must be positive, got ",
           epsilon);
  const auto D = x.dim(0), T = x.dim(1);
  MS_CHECK(gain.rank() == 1 && gain.dim(0) == D && bias.rank() == 1 &&
               bias.dim(0) == D,
           "global_layer_norm: gain/bias must be [D]=[", D, "], got ",
           shape_str(gain.shape()), " and ", shape_str(bias.shape()));
  const auto n = static_cast<double>(D * T);
  auto xv = x.values();
  double mu = 0.0;
  for (double v : xv) mu += v;
  mu /= n;
  double var = 0.0;
  for (double v : xv) var += (v - mu) * (v - mu);
  var /= n;
  const double inv = 1.0 / std::sqrt(var + epsilon);

  const bool track =
      x.requires_grad() || gain.requires_grad() || bias.requires_grad();
  Tensor out = Tensor::leaf(x.shape(), track);
  auto gv = gain.values();
  auto bv = bias.values();
  auto ov = out.values();
  for (std::int64_t d = 0; d < D; ++d)
    for (std::int64_t t = 0; t < T; ++t) {
      const auto i = static_cast<std::size_t>(d * T + t);
      ov[i] = gv[static_cast<std::size_t>(d)] * (xv[i] - mu) * inv +
              bv[static_cast<std::size_t>(d)];
    }
  if (track) {
    tape.record([x = x, gain = gain, bias = bias, out, mu, inv, D, T, n]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto xv = x.values();
      auto gv = gain.values();
      // dL/dxhat, plus the two reduction terms of the layer-norm backward
      std::vector<double> dxhat(xv.size());
      double s1 = 0.0, s2 = 0.0;
      for (std::int64_t d = 0; d < D; ++d)
        for (std::int64_t t = 0; t < T; ++t) {
          const auto i = static_cast<std::size_t>(d * T + t);
          const double xhat = (xv[i] - mu) * inv;
          dxhat[i] = g[i] * gv[static_cast<std::size_t>(d)];
          s1 += dxhat[i];
          s2 += dxhat[i] * xhat;
        }
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < xv.size(); ++i) {
          const double xhat = (xv[i] - mu) * inv;
          gx[i] += inv * (dxhat[i] - s1 / n - xhat * s2 / n);
        }
      }
      if (gain.requires_grad() || bias.requires_grad()) {
        for (std::int64_t d = 0; d < D; ++d) {
          double gg = 0.0, gb = 0.0;
          for (std::int64_t t = 0; t < T; ++t) {
            const auto i = static_cast<std::size_t>(d * T + t);
            gg += g[i] * (xv[i] - mu) * inv;
            gb += g[i];
          }
          if (gain.requires_grad())
            gain.grad()[static_cast<std::size_t>(d)] += gg;
          if (bias.requires_grad())
            bias.grad()[static_cast<std::size_t>(d)] += gb;
        }
      }
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, const Shape& shape) {
  MS_CHECK(shape_numel(shape) == x.numel(), "reshape: ", shape_str(x.shape()),
           " has ", x.numel(), " values, target ", shape_str(shape), " wants ",
           shape_numel(shape));
  const bool track = x.requires_grad();
  Tensor out = Tensor::leaf(shape, track);
  auto xv = x.values();
  auto ov = out.values();
  for (std::size_t i = 0; i < xv.size(); ++i) ov[i] = xv[i];
  if (track) {
    tape.record([x = x, out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

Tensor pad_time(Tape& tape, const Tensor& x, std::int64_t left,
                std::int64_t right) {
  MS_CHECK(x.rank() == 2, "pad_time: input must be [C x T], got ",
           shape_str(x.shape()));
  MS_CHECK(left >= 0 && right >= 0, "pad_time: negative padding ", left, "/",
           right);
  const auto C = x.dim(0), T = x.dim(1);
  const auto t_out = left + T + right;
  const bool track = x.requires_grad();
  Tensor out = Tensor::leaf({C, t_out}, track);
  auto xv = x.values();
  auto ov = out.values();
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t t = 0; t < T; ++t)
      ov[static_cast<std::size_t>(c * t_out + left + t)] =
          xv[static_cast<std::size_t>(c * T + t)];
  if (track) {
    tape.record([x = x, out, left, C, T, t_out]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t t = 0; t < T; ++t)
          gx[static_cast<std::size_t>(c * T + t)] +=
              g[static_cast<std::size_t>(c * t_out + left + t)];
    });
  }
  return out;
}

Tensor slice_time(Tape& tape, const Tensor& x, std::int64_t start,
                  std::int64_t count) {
  MS_CHECK(x.rank() == 2, "slice_time: input must be [C x T], got ",
           shape_str(x.shape()));
  const auto C = x.dim(0), T = x.dim(1);
  MS_CHECK(start >= 0 && count > 0 && start + count <= T,
           "slice_time: range [", start, ", ", start + count,
           ") out of bounds for T=", T);
  const bool track = x.requires_grad();
  Tensor out = Tensor::leaf({C, count}, track);
  auto xv = x.values();
  auto ov = out.values();
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t t = 0; t < count; ++t)
      ov[static_cast<std::size_t>(c * count + t)] =
          xv[static_cast<std::size_t>(c * T + start + t)];
  if (track) {
    tape.record([x = x, out, start, count, C, T]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::int64_t c = 0; c < C; ++c)
        for (std::int64_t t = 0; t < count; ++t)
          gx[static_cast<std::size_t>(c * T + start + t)] +=
              g[static_cast<std::size_t>(c * count + t)];
    });
  }
  return out;
}

Tensor slice_channels(Tape& tape, const Tensor& x, std::int64_t start,
                      std::int64_t count) {
  MS_CHECK(x.rank() == 2, "slice_channels: input must be [C x T], got ",
           shape_str(x.shape()));
  const auto C = x.dim(0), T = x.dim(1);
  MS_CHECK(start >= 0 && count > 0 && start + count <= C,
           "slice_channels: range [", start, ", ", start + count,
           ") out of bounds for C=", C);
  const bool track = x.requires_grad();
  Tensor out = Tensor::leaf({count, T}, track);
  auto xv = x.values();
  auto ov = out.values();
  for (std::int64_t c = 0; c < count; ++c)
    for (std::int64_t t = 0; t < T; ++t)
      ov[static_cast<std::size_t>(c * T + t)] =
          xv[static_cast<std::size_t>((start + c) * T + t)];
  if (track) {
    tape.record([x = x, out, start, count, T]() mutable {
      if (!out.has_grad()) return;
      auto g = out.grad();
      auto gx = x.grad();
      for (std::int64_t c = 0; c < count; ++c)
        for (std::int64_t t = 0; t < T; ++t)
          gx[static_cast<std::size_t>((start + c) * T + t)] +=
              g[static_cast<std::size_t>(c * T + t)];
    });
  }
  return out;
}

}  // namespace metasep::ag
