// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "doctest.h"
#include "metasep/error.h"
#include "metasep/ops.h"
#include "metasep/tensor.h"

using metasep::Error;
namespace ag = metasep::ag;

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kFdTol = 1e-4;

ag::Tensor random_tensor(const ag::Shape& shape, std::uint64_t seed,
                         double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<std::size_t>(ag::shape_numel(shape)));
  for (double& x : v) x = dist(rng);
  return ag::Tensor::from_values(shape, std::move(v));
}

// Magnitudes in [0.2, 1.2] with random signs, so kinked activations never
// change branch inside a finite-difference step.
ag::Tensor random_off_kink(const ag::Shape& shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> mag(0.2, 1.2);
  std::bernoulli_distribution flip(0.5);
  std::vector<double> v(static_cast<std::size_t>(ag::shape_numel(shape)));
  for (double& x : v) x = flip(rng) ? -mag(rng) : mag(rng);
  return ag::Tensor::from_values(shape, std::move(v));
}

using ScalarFn = std::function<ag::Tensor(ag::Tape&, const ag::Tensor&)>;

double fd(const ScalarFn& fn, const ag::Tensor& point) {
  return ag::finite_difference_check(fn, point, kFdStep);
}

}  // namespace

TEST_CASE("conv1d output length") {
  ag::Tape tape;
  auto run = [&](std::int64_t t, std::int64_t l, std::int64_t s) {
    ag::Tensor in = random_tensor({1, t}, 3);
    ag::Tensor k = random_tensor({1, 1, l}, 4);
    return ag::conv1d(tape, in, k, {.stride = s}).dim(1);
  };
  CHECK_EQ(run(16, 16, 8), 1);
  CHECK_EQ(run(8000, 16, 8), 999);
}

TEST_CASE("conv1d identity kernel") {
  ag::Tape tape;
  ag::Tensor in = random_tensor({1, 12}, 5);
  ag::Tensor k = ag::Tensor::from_values({1, 1, 1}, {1.0});
  ag::Tensor out = ag::conv1d(tape, in, k);
  REQUIRE_EQ(out.numel(), in.numel());
  for (std::int64_t i = 0; i < in.numel(); ++i) {
    CHECK_EQ(out.values()[i], in.values()[i]);
  }
}

TEST_CASE("conv1d channel mismatch is an error") {
  ag::Tape tape;
  ag::Tensor in = random_tensor({3, 10}, 6);
  ag::Tensor k = random_tensor({2, 2, 3}, 7);
  CHECK_THROWS_AS(ag::conv1d(tape, in, k), Error);
}

TEST_CASE("conv1d_transpose output length") {
  ag::Tape tape;
  auto run = [&](std::int64_t t, std::int64_t l, std::int64_t s) {
    ag::Tensor in = random_tensor({1, t}, 8);
    ag::Tensor k = random_tensor({1, 1, l}, 9);
    return ag::conv1d_transpose(tape, in, k, s).dim(1);
  };
  CHECK_EQ(run(1, 16, 8), 16);
  CHECK_EQ(run(999, 16, 8), 8000);
}

TEST_CASE("conv1d_transpose overlap-add by hand") {
  ag::Tape tape;
  ag::Tensor in = ag::Tensor::from_values({1, 3}, {1.0, 1.0, 1.0});
  ag::Tensor k = ag::Tensor::from_values({1, 1, 2}, {1.0, 1.0});
  ag::Tensor out = ag::conv1d_transpose(tape, in, k, 1);
  REQUIRE_EQ(out.shape(), ag::Shape{1, 4});
  const std::vector<double> want = {1.0, 2.0, 2.0, 1.0};
  for (int i = 0; i < 4; ++i) CHECK_EQ(out.values()[i], want[i]);
}

TEST_CASE("conv1d / conv1d_transpose adjoint identity") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::int64_t c_in = 2, c_out = 3, len = 5, stride = 2, t = 29;
    const std::int64_t t_out = (t - len) / stride + 1;
    ag::Tensor u = random_tensor({c_in, t}, 100 + seed);
    ag::Tensor k = random_tensor({c_out, c_in, len}, 200 + seed);
    ag::Tensor v = random_tensor({c_out, t_out}, 300 + seed);

    // <conv(u, k), v> == <u, conv_transpose(v, k)> for the same kernels.
    ag::Tape tape;
    double lhs =
        ag::dot(tape, ag::conv1d(tape, u, k, {.stride = stride}), v)
            .scalar_value();
    double rhs =
        ag::dot(tape, u, ag::conv1d_transpose(tape, v, k, stride))
            .scalar_value();
    CHECK(std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-8) < 1e-10);
  }
}

TEST_CASE("activation point values") {
  ag::Tape tape;
  ag::Tensor x = ag::Tensor::from_values({1, 1}, {-1.0});
  ag::Tensor a = ag::Tensor::from_values({1}, {0.25});
  CHECK_EQ(ag::prelu(tape, x, a).values()[0], doctest::Approx(-0.25));
  CHECK_EQ(ag::sigmoid(tape, ag::Tensor::scalar(0.0)).values()[0],
           doctest::Approx(0.5));
  CHECK_EQ(ag::relu(tape, ag::Tensor::scalar(-2.0)).values()[0], 0.0);
}

TEST_CASE("prelu slope gradient at a negative input") {
  ag::Tape tape;
  ag::Tensor x = ag::Tensor::from_values({1, 1}, {-1.0});
  ag::Tensor a = ag::Tensor::from_values({1}, {0.25}, /*requires_grad=*/true);
  ag::Tensor y = ag::sum(tape, ag::prelu(tape, x, a));
  tape.backward(y);
  CHECK_EQ(a.grad()[0], doctest::Approx(-1.0));
}

TEST_CASE("global_layer_norm zeroes a constant input") {
  ag::Tape tape;
  ag::Tensor x = ag::Tensor::from_values({2, 3}, std::vector<double>(6, 3.7));
  ag::Tensor gain = ag::Tensor::from_values({2}, {1.0, 1.0});
  ag::Tensor bias = ag::Tensor::from_values({2}, {0.0, 0.0});
  ag::Tensor y = ag::global_layer_norm(tape, x, gain, bias, 1e-8);
  for (double v : y.values()) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("global_layer_norm normalizes mean and variance") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ag::Tape tape;
    ag::Tensor x = random_tensor({4, 7}, 400 + seed, -3.0, 3.0);
    ag::Tensor gain = ag::Tensor::from_values({4}, std::vector<double>(4, 1.0));
    ag::Tensor bias = ag::Tensor::from_values({4}, std::vector<double>(4, 0.0));
    ag::Tensor y = ag::global_layer_norm(tape, x, gain, bias, 1e-8);
    double m = 0.0, v = 0.0;
    for (double e : y.values()) m += e;
    m /= static_cast<double>(y.numel());
    for (double e : y.values()) v += (e - m) * (e - m);
    v /= static_cast<double>(y.numel());
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(v - 1.0) < 1e-6);
  }
}

TEST_CASE("backward on sum of squares") {
  ag::Tape tape;
  ag::Tensor x = ag::Tensor::vector({1.0, 2.0, 3.0}, /*requires_grad=*/true);
  ag::Tensor y = ag::sum(tape, ag::mul(tape, x, x));
  tape.backward(y);
  CHECK_EQ(x.grad()[0], doctest::Approx(2.0));
  CHECK_EQ(x.grad()[1], doctest::Approx(4.0));
  CHECK_EQ(x.grad()[2], doctest::Approx(6.0));
}

TEST_CASE("backward through sigmoid of a sum") {
  ag::Tape tape;
  ag::Tensor x = ag::Tensor::vector({0.0, 0.0}, /*requires_grad=*/true);
  ag::Tensor y = ag::sigmoid(tape, ag::sum(tape, x));
  tape.backward(y);
  CHECK_EQ(x.grad()[0], doctest::Approx(0.25).epsilon(1e-12));
  CHECK_EQ(x.grad()[1], doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("backward rejects bad roots") {
  ag::Tape tape;
  ag::Tensor x = ag::Tensor::vector({1.0, 2.0}, /*requires_grad=*/true);
  ag::Tensor y = ag::mul(tape, x, x);
  CHECK_THROWS_AS(tape.backward(y), Error);  // not scalar

  ag::Tensor detached = ag::Tensor::scalar(1.0);
  CHECK_THROWS_AS(tape.backward(detached), Error);
}

TEST_CASE("gradients accumulate across uses") {
  ag::Tensor base = random_tensor({5}, 11);
  std::vector<double> vals(base.values().begin(), base.values().end());

  ag::Tensor twice = ag::Tensor::from_values({5}, vals, /*requires_grad=*/true);
  {
    ag::Tape tape;
    ag::Tensor y = ag::sum(tape, ag::mul(tape, twice, twice));
    tape.backward(y);
  }

  ag::Tensor once = ag::Tensor::from_values({5}, vals, /*requires_grad=*/true);
  ag::Tensor fixed = ag::Tensor::from_values({5}, vals, false);
  {
    ag::Tape tape;
    ag::Tensor y = ag::sum(tape, ag::mul(tape, once, fixed));
    tape.backward(y);
  }

  // x appears as both factors, so its grad must be the two single-use grads
  // added together.
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::abs(twice.grad()[i] - 2.0 * once.grad()[i]) < 1e-12);
  }
}

TEST_CASE("finite_difference_check calibration") {
  ag::Tensor x = ag::Tensor::vector({1.0, 2.0});
  ScalarFn linear = [](ag::Tape& t, const ag::Tensor& p) {
    return ag::sum(t, ag::scale(t, p, 3.0));
  };
  CHECK(fd(linear, x) < 1e-10);

  ScalarFn quadratic = [](ag::Tape& t, const ag::Tensor& p) {
    return ag::sum(t, ag::mul(t, p, p));
  };
  CHECK(fd(quadratic, x) < 1e-8);
}

TEST_CASE("finite differences: elementwise ops") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ag::Tensor other = random_tensor({3, 4}, 900 + seed);
    ag::Tensor positive = random_tensor({3, 4}, 910 + seed, 0.5, 2.0);

    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::add(t, p, other));
          }, random_tensor({3, 4}, seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::sub(t, p, other));
          }, random_tensor({3, 4}, 20 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::mul(t, p, other));
          }, random_tensor({3, 4}, 40 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::divide(t, p, positive));
          }, random_tensor({3, 4}, 60 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::divide(t, other, p));
          }, random_tensor({3, 4}, 80 + seed, 0.5, 2.0)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::scale(t, p, -1.7));
          }, random_tensor({3, 4}, 100 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::add_scalar(t, p, 0.3));
          }, random_tensor({3, 4}, 120 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::log_e(t, p));
          }, random_tensor({3, 4}, 140 + seed, 0.5, 2.0)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::sigmoid(t, p));
          }, random_tensor({3, 4}, 160 + seed, -2.0, 2.0)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::relu(t, p));
          }, random_off_kink({3, 4}, 180 + seed)) < kFdTol);
  }
}

TEST_CASE("finite differences: prelu input and slope") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ag::Tensor slope = random_tensor({3}, 950 + seed, 0.1, 0.5);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::prelu(t, p, slope));
          }, random_off_kink({3, 4}, 200 + seed)) < kFdTol);

    ag::Tensor x = random_off_kink({3, 4}, 220 + seed);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::prelu(t, x, p));
          }, random_tensor({3}, 240 + seed, 0.1, 0.5)) < kFdTol);
  }
}

TEST_CASE("finite differences: reductions and broadcasts") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ag::Tensor other = random_tensor({6}, 960 + seed);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, p);
          }, random_tensor({6}, 260 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::mean(t, p);
          }, random_tensor({6}, 280 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::dot(t, p, other);
          }, random_tensor({6}, 300 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::broadcast_mul(t, ag::sum(t, p),
                                                other));
          }, random_tensor({1}, 320 + seed, 0.5, 1.5)) < kFdTol);
    // Weighted so the centered result has a nonzero gradient.
    ag::Tensor w = random_tensor({6}, 350 + seed);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::mul(t, w, ag::broadcast_sub(t, p, ag::mean(t, p))));
          }, random_tensor({6}, 340 + seed)) < kFdTol);
  }
}

TEST_CASE("finite differences: convolutions") {
  const ag::Conv1dOpts plain{.stride = 1, .dilation = 1, .groups = 1};
  const ag::Conv1dOpts strided{.stride = 2, .dilation = 1, .groups = 1};
  const ag::Conv1dOpts dilated{.stride = 1, .dilation = 2, .groups = 1};
  const ag::Conv1dOpts depthwise{.stride = 1, .dilation = 2, .groups = 2};

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (const auto& opts : {plain, strided, dilated, depthwise}) {
      const ag::Shape kshape = opts.groups == 1 ? ag::Shape{3, 2, 3}
                                                : ag::Shape{2, 1, 3};
      ag::Tensor k = random_tensor(kshape, 970 + seed);
      CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
              return ag::sum(t, ag::conv1d(t, p, k, opts));
            }, random_tensor({2, 12}, 360 + seed)) < kFdTol);

      ag::Tensor in = random_tensor({2, 12}, 980 + seed);
      CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
              return ag::sum(t, ag::conv1d(t, in, p, opts));
            }, random_tensor(kshape, 380 + seed)) < kFdTol);
    }

    ag::Tensor kt = random_tensor({2, 3, 4}, 990 + seed);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::conv1d_transpose(t, p, kt, 2));
          }, random_tensor({2, 6}, 400 + seed)) < kFdTol);
    ag::Tensor tin = random_tensor({2, 6}, 995 + seed);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::conv1d_transpose(t, tin, p, 2));
          }, random_tensor({2, 3, 4}, 420 + seed)) < kFdTol);
  }
}

TEST_CASE("finite differences: global_layer_norm") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ag::Tensor gain = random_tensor({4}, 1000 + seed, 0.5, 1.5);
    ag::Tensor bias = random_tensor({4}, 1010 + seed, -0.2, 0.2);
    ag::Tensor x = random_tensor({4, 5}, 1020 + seed, -2.0, 2.0);

    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::global_layer_norm(t, p, gain, bias, 1e-8));
          }, random_tensor({4, 5}, 440 + seed, -2.0, 2.0)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::global_layer_norm(t, x, p, bias, 1e-8));
          }, random_tensor({4}, 460 + seed, 0.5, 1.5)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::global_layer_norm(t, x, gain, p, 1e-8));
          }, random_tensor({4}, 480 + seed, -0.2, 0.2)) < kFdTol);
  }
}

TEST_CASE("finite differences: shape ops") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    // Weight the output so slicing/padding has a non-uniform pull-back.
    ag::Tensor w6 = random_tensor({2, 3}, 1030 + seed);
    ag::Tensor w10 = random_tensor({2, 5}, 1040 + seed);
    ag::Tensor w4 = random_tensor({1, 4}, 1050 + seed);

    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::mul(t, ag::reshape(t, p, {2, 3}), w6));
          }, random_tensor({6}, 500 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::mul(t, ag::pad_time(t, p, 1, 1), w10));
          }, random_tensor({2, 3}, 520 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::mul(t, ag::slice_time(t, p, 1, 3), w6));
          }, random_tensor({2, 5}, 540 + seed)) < kFdTol);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::mul(t, ag::slice_channels(t, p, 1, 1), w4));
          }, random_tensor({3, 4}, 560 + seed)) < kFdTol);
  }
}

TEST_CASE("composite conv1d -> prelu -> sum matches finite differences") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ag::Tensor k = random_tensor({3, 2, 4}, 1060 + seed);
    ag::Tensor slope = random_tensor({3}, 1070 + seed, 0.1, 0.4);
    CHECK(fd([&](ag::Tape& t, const ag::Tensor& p) {
            return ag::sum(t, ag::prelu(t, ag::conv1d(t, p, k, {.stride = 2}),
                                        slope));
          }, random_tensor({2, 16}, 580 + seed)) < kFdTol);
  }
}

TEST_CASE("op errors") {
  ag::Tape tape;
  ag::Tensor a = random_tensor({2, 3}, 1);
  ag::Tensor b = random_tensor({3, 2}, 2);
  CHECK_THROWS_AS(ag::add(tape, a, b), Error);
  CHECK_THROWS_AS(ag::reshape(tape, a, {4}), Error);
  CHECK_THROWS_AS(ag::log_e(tape, ag::Tensor::vector({1.0, -1.0})), Error);
  CHECK_THROWS_AS(ag::slice_time(tape, a, 2, 5), Error);
  ag::Tensor short_in = random_tensor({1, 3}, 3);
  ag::Tensor k = random_tensor({1, 1, 5}, 4);
  CHECK_THROWS_AS(ag::conv1d(tape, short_in, k), Error);
}

TEST_CASE("forward determinism") {
  ag::Tensor in = random_tensor({2, 20}, 77);
  ag::Tensor k = random_tensor({2, 2, 3}, 78);
  ag::Tape t1, t2;
  ag::Tensor y1 = ag::conv1d(t1, in, k, {.stride = 2});
  ag::Tensor y2 = ag::conv1d(t2, in, k, {.stride = 2});
  REQUIRE_EQ(y1.numel(), y2.numel());
  for (std::int64_t i = 0; i < y1.numel(); ++i) {
    CHECK_EQ(y1.values()[i], y2.values()[i]);
  }
}
