// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef METASEP_OPS_H_
#define METASEP_OPS_H_

#include "metasep/tensor.h"

namespace metasep::ag {

// Elementwise; operands must have identical shapes.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor divide(Tape& tape, const Tensor& a, const Tensor& b);

Tensor scale(Tape& tape, const Tensor& a, double factor);
Tensor add_scalar(Tape& tape, const Tensor& a, double shift);

// Broadcast a scalar tensor over x: s * x, and x - s.
Tensor broadcast_mul(Tape& tape, const Tensor& s, const Tensor& x);
Tensor broadcast_sub(Tape& tape, const Tensor& x, const Tensor& s);

Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);
Tensor dot(Tape& tape, const Tensor& a, const Tensor& b);

// Natural log; input values must be strictly positive.
Tensor log_e(Tape& tape, const Tensor& a);

Tensor sigmoid(Tape& tape, const Tensor& a);
Tensor relu(Tape& tape, const Tensor& a);
// x is [C x T]; slope holds one trainable value per channel.
Tensor prelu(Tape& tape, const Tensor& x, const Tensor& slope);

struct Conv1dOpts {
  std::int64_t stride = 1;
  std::int64_t dilation = 1;
  std::int64_t groups = 1;
};

// input [C_in x T], kernels [C_out x C_in/groups x L].
// Output [C_out x T'] with T' = floor((T - span)/stride) + 1,
// span = (L-1)*dilation + 1. Valid padding only.
Tensor conv1d(Tape& tape, const Tensor& input, const Tensor& kernels,
              const Conv1dOpts& opts = {});

// input [C_in x T'], kernels [C_in x C_out x L]. Output [C_out x T] with
// T = (T'-1)*stride + L. Adjoint of conv1d for the same kernel tensor.
Tensor conv1d_transpose(Tape& tape, const Tensor& input, const Tensor& kernels,
                        std::int64_t stride);

// Normalizes over all D*T entries of x [D x T]; gain/bias are per channel [D].
Tensor global_layer_norm(Tape& tape, const Tensor& x, const Tensor& gain,
                         const Tensor& bias, double epsilon);

// Same values under a new shape; element count must be unchanged.
Tensor reshape(Tape& tape, const Tensor& x, const Shape& shape);

// Zero padding / slicing along the last (time) axis of a [C x T] tensor.
Tensor pad_time(Tape& tape, const Tensor& x, std::int64_t left,
                std::int64_t right);
Tensor slice_time(Tape& tape, const Tensor& x, std::int64_t start,
                  std::int64_t count);
// Slice along the channel axis of a [C x T] tensor.
Tensor slice_channels(Tape& tape, const Tensor& x, std::int64_t start,
                      std::int64_t count);

}  // namespace metasep::ag

#endif  // METASEP_OPS_H_
