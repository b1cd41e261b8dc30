// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metasep/objective.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "metasep/error.h"
#include "metasep/ops.h"

namespace metasep::objective {

namespace {

constexpr int kMaxSources = 6;
constexpr double kDbPerNat = 10.0 / 2.302585092994045684;  // 10 / ln(10)

ag::Tensor as_flat(ag::Tape& tape, const ag::Tensor& x) {
  if (x.rank() == 1) return x;
  return ag::reshape(tape, x, {x.numel()});
}

ag::Tensor constant_signal(const AudioSignal& s) {
  MS_CHECK(!s.samples.empty(), "empty signal has no SI-SNR");
  return ag::Tensor::from_values({static_cast<std::int64_t>(s.samples.size())},
                                 s.samples, false);
}

}  // namespace

ag::Tensor si_snr_node(ag::Tape& tape, const ag::Tensor& estimate,
                       const ag::Tensor& reference, const SiSnrOptions& opts) {
  MS_CHECK(opts.epsilon > 0.0, "SI-SNR epsilon must be positive, got ",
           opts.epsilon);
  ag::Tensor est = as_flat(tape, estimate);
  ag::Tensor ref = as_flat(tape, reference);
  MS_CHECK(est.numel() == ref.numel(), "SI-SNR needs equal lengths, estimate ",
           est.numel(), " vs reference ", ref.numel());

  if (opts.zero_mean) {
    est = ag::broadcast_sub(tape, est, ag::mean(tape, est));
    ref = ag::broadcast_sub(tape, ref, ag::mean(tape, ref));
  }

  ag::Tensor ref_power = ag::dot(tape, ref, ref);
  MS_CHECK(ref_power.scalar_value() > 0.0,
           "SI-SNR reference has zero power, the projection is undefined");

  // s_target = <est, ref> / ||ref||^2 * ref, e = est - s_target.
  ag::Tensor inner = ag::dot(tape, est, ref);
  ag::Tensor coeff = ag::divide(tape, inner, ref_power);
  ag::Tensor s_target = ag::broadcast_mul(tape, coeff, ref);
  ag::Tensor noise = ag::sub(tape, est, s_target);

  ag::Tensor num =
      ag::add_scalar(tape, ag::dot(tape, s_target, s_target), opts.epsilon);
  ag::Tensor den = ag::add_scalar(tape, ag::dot(tape, noise, noise),
                                  opts.epsilon);
  ag::Tensor ratio = ag::divide(tape, num, den);
  return ag::scale(tape, ag::log_e(tape, ratio), kDbPerNat);
}

double si_snr(const AudioSignal& estimate, const AudioSignal& reference,
              const SiSnrOptions& opts) {
  ag::Tape tape;
  return si_snr_node(tape, constant_signal(estimate),
                     constant_signal(reference), opts)
      .scalar_value();
}

LossValue upit_loss(ag::Tape& tape, const std::vector<ag::Tensor>& estimates,
                    const std::vector<ag::Tensor>& references,
                    const SiSnrOptions& opts) {
  const int c = static_cast<int>(estimates.size());
  MS_CHECK(c >= 1, "uPIT needs at least one source");
  MS_CHECK(static_cast<int>(references.size()) == c, "uPIT got ", c,
           " estimates but ", references.size(), " references");
  MS_CHECK(c <= kMaxSources, "uPIT enumerates all permutations and refuses ",
           c, " sources (limit ", kMaxSources, ")");

  // Pairwise SI-SNR nodes; entry [i][j] scores estimate i against
  // reference j.
  std::vector<std::vector<ag::Tensor>> pair_nodes(
      static_cast<std::size_t>(c));
  for (int i = 0; i < c; ++i) {
    for (int j = 0; j < c; ++j) {
      pair_nodes[static_cast<std::size_t>(i)].push_back(
          si_snr_node(tape, estimates[static_cast<std::size_t>(i)],
                      references[static_cast<std::size_t>(j)], opts));
    }
  }

  std::vector<int> perm(static_cast<std::size_t>(c));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<int> best = perm;
  double best_mean = -std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < c; ++i) {
      total += pair_nodes[static_cast<std::size_t>(i)]
                         [static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])]
                             .scalar_value();
    }
    const double mean = total / c;
    // Strict comparison keeps the first (lexicographically smallest)
    // permutation on ties.
    if (mean > best_mean) {
      best_mean = mean;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));

  ag::Tensor sum_node =
      pair_nodes[0][static_cast<std::size_t>(best[0])];
  for (int i = 1; i < c; ++i) {
    sum_node = ag::add(tape, sum_node,
                       pair_nodes[static_cast<std::size_t>(i)]
                                 [static_cast<std::size_t>(best[static_cast<std::size_t>(i)])]);
  }

  LossValue out;
  out.node = ag::scale(tape, sum_node, -1.0 / c);
  out.value = out.node.scalar_value();
  out.permutation = best;
  return out;
}

LossValue upit_loss_value(const std::vector<AudioSignal>& estimates,
                          const std::vector<AudioSignal>& references,
                          const SiSnrOptions& opts) {
  ag::Tape tape;
  std::vector<ag::Tensor> est;
  std::vector<ag::Tensor> ref;
  est.reserve(estimates.size());
  ref.reserve(references.size());
  for (const AudioSignal& s : estimates) est.push_back(constant_signal(s));
  for (const AudioSignal& s : references) ref.push_back(constant_signal(s));
  return upit_loss(tape, est, ref, opts);
}

double si_snri(const AudioSignal& estimate, const AudioSignal& reference,
               const AudioSignal& mixture, const SiSnrOptions& opts) {
  return si_snr(estimate, reference, opts) - si_snr(mixture, reference, opts);
}

}  // namespace metasep::objective
