// Copyright 2026 The Metasep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "metasep/tensor.h"

#include <cmath>
#include <utility>

#include "metasep/error.h"

namespace metasep::ag {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += " x ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    MS_CHECK(d > 0, "tensor extent must be positive, got shape ", shape_str(shape));
    n *= d;
  }
  return n;
}

struct Tensor::Impl {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
};

Tensor Tensor::leaf(Shape shape, bool requires_grad) {
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->values.assign(static_cast<std::size_t>(shape_numel(shape)), 0.0);
  t.impl_->shape = std::move(shape);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  MS_CHECK(shape_numel(shape) == static_cast<std::int64_t>(values.size()),
           "value count ", values.size(), " does not match shape ",
           shape_str(shape));
  Tensor t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = std::move(shape);
  t.impl_->values = std::move(values);
  t.impl_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  auto n = static_cast<std::int64_t>(values.size());
  return from_values({n}, std::move(values), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_values({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
  MS_CHECK(impl_, "use of undefined tensor");
  return impl_->shape;
}

int Tensor::rank() const { return static_cast<int>(shape().size()); }

std::int64_t Tensor::dim(int axis) const {
  const auto& s = shape();
  MS_CHECK(axis >= 0 && axis < static_cast<int>(s.size()), "axis ", axis,
           " out of range for shape ", shape_str(s));
  return s[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::numel() const {
  return static_cast<std::int64_t>(impl_ ? impl_->values.size() : 0);
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

std::span<double> Tensor::values() {
  MS_CHECK(impl_, "use of undefined tensor");
  return impl_->values;
}

std::span<const double> Tensor::values() const {
  MS_CHECK(impl_, "use of undefined tensor");
  return impl_->values;
}

double Tensor::scalar_value() const {
  MS_CHECK(numel() == 1, "scalar_value on tensor of shape ", shape_str(shape()));
  return impl_->values[0];
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<double> Tensor::grad() {
  MS_CHECK(impl_, "use of undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

std::span<const double> Tensor::grad() const {
  MS_CHECK(impl_ && !impl_->grad.empty(), "gradient not populated");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (has_grad()) impl_->grad.assign(impl_->values.size(), 0.0);
}

void Tensor::drop_grad() {
  if (impl_) impl_->grad.clear();
}

Tensor Tensor::clone() const {
  MS_CHECK(impl_, "clone of undefined tensor");
  return from_values(impl_->shape, impl_->values, impl_->requires_grad);
}

bool Tensor::all_finite() const {
  MS_CHECK(impl_, "use of undefined tensor");
  for (double v : impl_->values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tape::record(std::function<void()> backward_step) {
  steps_.push_back(std::move(backward_step));
}

void Tape::backward(const Tensor& root) {
  MS_CHECK(root.numel() == 1, "backward root must be scalar, got shape ",
           shape_str(root.shape()));
  MS_CHECK(root.requires_grad(),
           "backward on detached tensor: root does not require grad");
  Tensor r = root;
  r.grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

double finite_difference_check(
    const std::function<Tensor(Tape&, const Tensor&)>& fn, const Tensor& point,
    double step) {
  MS_CHECK(step > 0, "finite difference step must be positive, got ", step);

  Tensor x = Tensor::from_values(point.shape(),
                                 {point.values().begin(), point.values().end()},
                                 /*requires_grad=*/true);
  Tape tape;
  Tensor y = fn(tape, x);
  MS_CHECK(y.numel() == 1, "finite_difference_check needs a scalar function, got ",
           shape_str(y.shape()));
  tape.backward(y);
  std::vector<double> analytic(x.grad().begin(), x.grad().end());

  auto eval = [&fn](const Tensor& at) {
    Tape t;
    return fn(t, at).scalar_value();
  };

  double max_rel = 0.0;
  Tensor probe = point.clone();
  auto vals = probe.values();
  for (std::size_t i = 0; i < vals.size(); ++i) {
    const double saved = vals[i];
    vals[i] = saved + step;
    const double up = eval(probe);
    vals[i] = saved - step;
    const double down = eval(probe);
    vals[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double rel = std::abs(analytic[i] - numeric) /
                       std::max(std::abs(analytic[i]), 1e-8);
    if (rel > max_rel) max_rel = rel;
  }
  return max_rel;
}

}  // namespace metasep::ag
