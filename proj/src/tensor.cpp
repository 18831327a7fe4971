/*
 * Copyright 2026 The FundusNet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fnet/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

#include "fnet/errors.hpp"

namespace fnet {

namespace {

std::size_t checked_product(const std::vector<std::size_t>& dims) {
  std::size_t count = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("shape extents must be >= 1");
    if (count > std::numeric_limits<std::size_t>::max() / d) {
      throw ShapeError("shape element count overflows size_t");
    }
    count *= d;
  }
  return count;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().to_string() +
                     " vs " + b.shape().to_string());
  }
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.shape().rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got " + t.shape().to_string());
  }
}

}  // namespace

Shape::Shape(std::initializer_list<std::size_t> dims) : Shape(std::vector<std::size_t>(dims)) {}

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
  count_ = dims_.empty() ? 0 : checked_product(dims_);
}

std::string Shape::to_string() const {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) out << ',';
    out << dims_[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_.element_count(), fill) {}

Tensor Tensor::from_values(Shape shape, std::vector<double> values) {
  if (values.size() != shape.element_count()) {
    throw ShapeError("from_values: shape " + shape.to_string() + " expects " +
                     std::to_string(shape.element_count()) + " values, got " +
                     std::to_string(values.size()));
  }
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  return t;
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.rank()) {
    throw ShapeError("index rank " + std::to_string(index.size()) + " does not match shape " +
                     shape_.to_string());
  }
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw ShapeError("index out of range for shape " + shape_.to_string());
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return flat;
}

double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[offset(index)]; }
double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[offset(index)]; }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.element_count() != data_.size()) {
    throw ShapeError("cannot reshape " + shape_.to_string() + " to " + shape.to_string());
  }
  return from_values(std::move(shape), data_);
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double sigmoid(double x) noexcept {
  // Split on sign so exp never overflows.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul: inner dimensions differ " + a.shape().to_string() + " x " +
                     b.shape().to_string());
  }
  Tensor out(Shape{m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  // i-p-j order: each output element still accumulates over p = 0..k-1 in order.
  for (std::size_t i = 0; i < m; ++i) {
    double* row = po + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_tn");
  require_rank(b, 2, "matmul_tn");
  const std::size_t k = a.shape()[0], m = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw ShapeError("matmul_tn: leading dimensions differ " + a.shape().to_string() + " vs " +
                     b.shape().to_string());
  }
  Tensor out(Shape{m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t p = 0; p < k; ++p) {
    const double* arow = pa + p * m;
    const double* brow = pb + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* row = po + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_nt");
  require_rank(b, 2, "matmul_nt");
  const std::size_t m = a.shape()[0], k = a.shape()[1], n = b.shape()[0];
  if (b.shape()[1] != k) {
    throw ShapeError("matmul_nt: trailing dimensions differ " + a.shape().to_string() + " vs " +
                     b.shape().to_string());
  }
  Tensor out(Shape{m, n});
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      po[i * n + j] = acc;
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  const std::size_t m = a.shape()[0], n = a.shape()[1];
  Tensor out(Shape{n, m});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  }
  return out;
}

Tensor map_unary(const Tensor& t, Unary f) {
  Tensor out = t;
  for (double& v : out.values()) {
    switch (f) {
      case Unary::relu:
        v = v > 0.0 ? v : 0.0;
        break;
      case Unary::sigmoid:
        v = sigmoid(v);
        break;
      case Unary::tanh:
        v = std::tanh(v);
        break;
      case Unary::relu_grad:
        v = v > 0.0 ? 1.0 : 0.0;
        break;
      case Unary::sigmoid_grad: {
        const double s = sigmoid(v);
        v = s * (1.0 - s);
        break;
      }
      case Unary::tanh_grad: {
        const double th = std::tanh(v);
        v = 1.0 - th * th;
        break;
      }
    }
  }
  return out;
}

Tensor elementwise(const Tensor& a, const Tensor& b, Binary op) {
  require_same_shape(a, b, "elementwise");
  Tensor out = a;
  const std::size_t n = out.size();
  double* po = out.data();
  const double* pb = b.data();
  switch (op) {
    case Binary::add:
      for (std::size_t i = 0; i < n; ++i) po[i] += pb[i];
      break;
    case Binary::sub:
      for (std::size_t i = 0; i < n; ++i) po[i] -= pb[i];
      break;
    case Binary::mul:
      for (std::size_t i = 0; i < n; ++i) po[i] *= pb[i];
      break;
  }
  return out;
}

}  // namespace fnet
