// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef METASEP_OBJECTIVE_H_
#define METASEP_OBJECTIVE_H_

#include <vector>

#include "metasep/audio.h"
#include "metasep/tensor.h"

namespace metasep::objective {

struct SiSnrOptions {
  double epsilon = 1e-8;
  // The measure as defined works on the raw signals. Mean subtraction is a
  // common preprocessing variant, off by default.
  bool zero_mean = false;
};

// Scale-invariant SNR in dB as a graph node. The estimate may carry
// gradients; the reference is treated as a constant.
ag::Tensor si_snr_node(ag::Tape& tape, const ag::Tensor& estimate,
                       const ag::Tensor& reference,
                       const SiSnrOptions& opts = {});

double si_snr(const AudioSignal& estimate, const AudioSignal& reference,
              const SiSnrOptions& opts = {});

struct LossValue {
  double value = 0.0;               // negated mean SI-SNR over sources, dB
  std::vector<int> permutation;     // estimate i is scored against
                                    // reference permutation[i]
  ag::Tensor node;                  // scalar loss on the tape
};

// Permutation-invariant training loss: the permutation with the highest mean
// SI-SNR is selected per call, ties resolved toward the lexicographically
// smallest assignment. Supports up to 6 sources.
LossValue upit_loss(ag::Tape& tape, const std::vector<ag::Tensor>& estimates,
                    const std::vector<ag::Tensor>& references,
                    const SiSnrOptions& opts = {});

LossValue upit_loss_value(const std::vector<AudioSignal>& estimates,
                          const std::vector<AudioSignal>& references,
                          const SiSnrOptions& opts = {});

// Improvement of the estimate over the unprocessed mixture, in dB.
double si_snri(const AudioSignal& estimate, const AudioSignal& reference,
               const AudioSignal& mixture, const SiSnrOptions& opts = {});

}  // namespace metasep::objective

#endif  // METASEP_OBJECTIVE_H_
