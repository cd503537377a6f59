// Copyright 2026 The tokprune Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdlib>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace tokprune {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// 64-byte aligned storage. Vectorized reductions peel on pointer alignment,
/// so fixing the alignment of every buffer keeps results bit-identical
/// between runs.
template <typename T, std::size_t Alignment = 64>
struct AlignedAllocator {
  using value_type = T;
  template <typename U>
  struct rebind {
    using other = AlignedAllocator<U, Alignment>;
  };

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U, Alignment>&) noexcept {}

  T* allocate(std::size_t n) {
    std::size_t bytes = (n * sizeof(T) + Alignment - 1) / Alignment * Alignment;
    void* p = std::aligned_alloc(Alignment, bytes == 0 ? Alignment : bytes);
    if (p == nullptr) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { std::free(p); }

  template <typename U>
  bool operator==(const AlignedAllocator<U, Alignment>&) const noexcept {
    return true;
  }
};

/// Dense row-major fp32 array with an explicit shape.
class Tensor {
 public:
  using Storage = std::vector<float, AlignedAllocator<float>>;

  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::span<const float> values);
  Tensor(Shape shape, std::initializer_list<float> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return {data_.data(), data_.size()}; }
  std::span<const float> data() const { return {data_.data(), data_.size()}; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }

  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  float& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  float at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  float& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  float at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Same data under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool operator==(const Tensor& other) const {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  Storage data_;
};

Tensor identity(std::size_t n);

namespace ops {

/// a[m x k] * b[k x p]. Fixed blocking and accumulation order: repeated
/// calls on equal inputs are bit-identical.
Tensor matmul(const Tensor& a, const Tensor& b);

/// a[m x k] * b[p x k]^T without materializing the transpose.
Tensor matmul_transposed(const Tensor& a, const Tensor& b);

/// Numerically stable softmax along `axis` (max subtracted per slice).
Tensor softmax(const Tensor& x, std::size_t axis);

inline constexpr float kLayerNormEps = 1e-6f;

/// Normalizes over the last dimension with population variance.
Tensor layer_norm(const Tensor& x, std::span<const float> gamma,
                  std::span<const float> beta, float eps = kLayerNormEps);

/// GELU, tanh approximation:
///   0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
/// Differs from the erf form by < 1e-3 everywhere.
Tensor gelu(const Tensor& x);

/// x[..., in] * w[in x out] + b[out].
Tensor linear(const Tensor& x, const Tensor& w, std::span<const float> b);

/// Reductions removing `axis`.
Tensor amax(const Tensor& x, std::size_t axis);
Tensor sum(const Tensor& x, std::size_t axis);

Tensor add(const Tensor& a, const Tensor& b);
void add_inplace(Tensor& a, const Tensor& b);

}  // namespace ops
}  // namespace tokprune
