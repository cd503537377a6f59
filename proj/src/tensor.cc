// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#include "tokprune/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Core>

#include "tokprune/errors.hpp"

namespace tokprune {

namespace {

using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor, Eigen::Aligned64>;
using MutMap = Eigen::Map<RowMajor, Eigen::Aligned64>;

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    std::ostringstream os;
    os << op << ": expected rank " << rank << ", got " << shape_string(t.shape());
    throw DimensionError(os.str());
  }
}

void require_axis(const Tensor& t, std::size_t axis, const char* op) {
  if (axis >= t.rank()) {
    std::ostringstream os;
    os << op << ": axis " << axis << " out of range for " << shape_string(t.shape());
    throw DimensionError(os.str());
  }
}

// Splits a shape around `axis` into (outer, extent, inner) strides.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

template <typename Init, typename Combine>
Tensor reduce(const Tensor& x, std::size_t axis, const char* op, Init init, Combine combine) {
  require_axis(x, axis, op);
  Shape out_shape = x.shape();
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape.push_back(1);
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor out(out_shape);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      auto acc = init();
      for (std::size_t e = 0; e < s.extent; ++e) {
        acc = combine(acc, x[(o * s.extent + e) * s.inner + in]);
      }
      out[o * s.inner + in] = static_cast<float>(acc);
    }
  }
  return out;
}

}  // namespace

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape, float fill) : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive: " + shape_string(shape_));
  }
  data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::span<const float> values) : Tensor(std::move(shape)) {
  if (values.size() != data_.size()) {
    throw DimensionError("tensor " + shape_string(shape_) + " needs " +
                         std::to_string(data_.size()) + " values, got " +
                         std::to_string(values.size()));
  }
  std::copy(values.begin(), values.end(), data_.begin());
}

Tensor::Tensor(Shape shape, std::initializer_list<float> values)
    : Tensor(std::move(shape), std::span<const float>(values.begin(), values.size())) {}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("axis " + std::to_string(axis) + " out of range for " +
                         shape_string(shape_));
  }
  return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_numel(shape) != numel()) {
    throw DimensionError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  }
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

Tensor identity(std::size_t n) {
  Tensor out({n, n});
  for (std::size_t i = 0; i < n; ++i) out.at(i, i) = 1.0f;
  return out;
}

namespace ops {

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto p = static_cast<Eigen::Index>(b.dim(1));
  Tensor out({a.dim(0), b.dim(1)});
  MutMap(out.raw(), m, p).noalias() = ConstMap(a.raw(), m, k) * ConstMap(b.raw(), k, p);
  return out;
}

Tensor matmul_transposed(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul_transposed");
  require_rank(b, 2, "matmul_transposed");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_transposed: inner dimensions differ: " +
                         shape_string(a.shape()) + " vs " + shape_string(b.shape()) + "^T");
  }
  const auto m = static_cast<Eigen::Index>(a.dim(0));
  const auto k = static_cast<Eigen::Index>(a.dim(1));
  const auto p = static_cast<Eigen::Index>(b.dim(0));
  Tensor out({a.dim(0), b.dim(0)});
  MutMap(out.raw(), m, p).noalias() =
      ConstMap(a.raw(), m, k) * ConstMap(b.raw(), p, k).transpose();
  return out;
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  require_axis(x, axis, "softmax");
  const AxisSplit s = split_axis(x.shape(), axis);
  Tensor out(x.shape());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      float mx = -std::numeric_limits<float>::infinity();
      for (std::size_t e = 0; e < s.extent; ++e) mx = std::max(mx, x[base + e * s.inner]);
      double total = 0.0;
      for (std::size_t e = 0; e < s.extent; ++e) {
        const float v = std::exp(x[base + e * s.inner] - mx);
        out[base + e * s.inner] = v;
        total += v;
      }
      const float inv = static_cast<float>(1.0 / total);
      for (std::size_t e = 0; e < s.extent; ++e) out[base + e * s.inner] *= inv;
    }
  }
  return out;
}

Tensor layer_norm(const Tensor& x, std::span<const float> gamma, std::span<const float> beta,
                  float eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm: empty tensor");
  const std::size_t d = x.shape().back();
  if (gamma.size() != d || beta.size() != d) {
    throw DimensionError("layer_norm: gamma/beta length " + std::to_string(gamma.size()) + "/" +
                         std::to_string(beta.size()) + " does not match last dimension of " +
                         shape_string(x.shape()));
  }
  Tensor out(x.shape());
  const std::size_t rows = x.numel() / d;
  for (std::size_t r = 0; r < rows; ++r) {
    const float* in = x.raw() + r * d;
    float* dst = out.raw() + r * d;
    double mean = 0.0;
    for (std::size_t i = 0; i < d; ++i) mean += in[i];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double c = in[i] - mean;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps));
    for (std::size_t i = 0; i < d; ++i) {
      dst[i] = static_cast<float>((in[i] - mean) * inv) * gamma[i] + beta[i];
    }
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  constexpr float kSqrt2OverPi = 0.7978845608028654f;
  constexpr float kCubic = 0.044715f;
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const float v = x[i];
    out[i] = 0.5f * v * (1.0f + std::tanh(kSqrt2OverPi * (v + kCubic * v * v * v)));
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, std::span<const float> b) {
  require_rank(w, 2, "linear");
  if (x.rank() == 0 || x.shape().back() != w.dim(0)) {
    throw DimensionError("linear: input " + shape_string(x.shape()) +
                         " does not match weight " + shape_string(w.shape()));
  }
  if (b.size() != w.dim(1)) {
    throw DimensionError("linear: bias length " + std::to_string(b.size()) +
                         " does not match weight " + shape_string(w.shape()));
  }
  const std::size_t rows = x.numel() / w.dim(0);
  Tensor flat = matmul(x.reshaped({rows, w.dim(0)}), w);
  const std::size_t out_dim = w.dim(1);
  for (std::size_t r = 0; r < rows; ++r) {
    float* row = flat.raw() + r * out_dim;
    for (std::size_t j = 0; j < out_dim; ++j) row[j] += b[j];
  }
  Shape out_shape = x.shape();
  out_shape.back() = out_dim;
  return flat.reshaped(std::move(out_shape));
}

Tensor amax(const Tensor& x, std::size_t axis) {
  return reduce(
      x, axis, "amax", [] { return -std::numeric_limits<float>::infinity(); },
      [](float acc, float v) { return std::max(acc, v); });
}

Tensor sum(const Tensor& x, std::size_t axis) {
  return reduce(
      x, axis, "sum", [] { return 0.0; }, [](double acc, float v) { return acc + v; });
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tensor out = a;
  add_inplace(out, b);
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("add: shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

}  // namespace ops
}  // namespace tokprune
