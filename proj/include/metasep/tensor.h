// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef METASEP_TENSOR_H_
#define METASEP_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace metasep::ag {

using Shape = std::vector<std::int64_t>;

std::string shape_str(const Shape& shape);
std::int64_t shape_numel(const Shape& shape);

// Dense double-precision tensor. Value-semantic handle over shared storage:
// copies alias the same data, clone() makes an independent one. Gradients
// live next to the values and are allocated lazily on first touch.
class Tensor {
 public:
  Tensor() = default;

  static Tensor leaf(Shape shape, bool requires_grad = false);
  static Tensor from_values(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int rank() const;
  std::int64_t dim(int axis) const;
  std::int64_t numel() const;
  bool requires_grad() const;

  std::span<double> values();
  std::span<const double> values() const;
  double scalar_value() const;  // numel() must be 1

  bool has_grad() const;
  // Allocates a zeroed accumulator on first use.
  std::span<double> grad();
  std::span<const double> grad() const;  // error if absent
  void zero_grad();
  void drop_grad();

  // Deep copy of shape/values/requires_grad; gradient is not carried over.
  Tensor clone() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  bool all_finite() const;

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// Ordered record of executed operations. Ops append their backward step as
// they run, so the record is topologically sorted by construction; backward
// replays it once in reverse. A tape and its tensors belong to one execution
// context.
class Tape {
 public:
  void record(std::function<void()> backward_step);

  // Seeds root.grad with 1 and runs every recorded step in reverse order.
  // root must be a scalar that requires grad.
  void backward(const Tensor& root);

  std::size_t num_ops() const { return steps_.size(); }

 private:
  std::vector<std::function<void()>> steps_;
};

// Max over coordinates of |analytic - central difference| / max(|analytic|, 1e-8)
// for a scalar-valued tensor function. fn must be deterministic; it is invoked
// on a fresh tape per evaluation.
double finite_difference_check(
    const std::function<Tensor(Tape&, const Tensor&)>& fn, const Tensor& point,
    double step);

}  // namespace metasep::ag

#endif  // METASEP_TENSOR_H_
