/* Copyright 2026 The dlcond Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dlc {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major tensor of doubles.
///
/// Invariant: product(shape) == size(). Tensors are plain values; copies are
/// deep and there are no views.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  // Multi-index access; bounds are checked in debug builds only.
  double& at(std::initializer_list<std::size_t> index);
  double at(std::initializer_list<std::size_t> index) const;

  Tensor reshaped(Shape shape) const&;
  Tensor reshaped(Shape shape) &&;

  void fill(double value);
  bool all_finite() const noexcept;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double scale);

  bool operator==(const Tensor& other) const = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const;

  Shape shape_;
  std::vector<double> data_;
};

Tensor operator+(Tensor lhs, const Tensor& rhs);
Tensor operator-(Tensor lhs, const Tensor& rhs);
Tensor operator*(double scale, Tensor t);

double max_abs_diff(const Tensor& a, const Tensor& b);
double sum(const Tensor& t);
// Elementwise product summed.
double dot(const Tensor& a, const Tensor& b);

// Throws NumericalError naming `what` if any element is NaN or infinite.
void require_finite(const Tensor& t, std::string_view what);

Tensor random_uniform(Shape shape, double lo, double hi, std::mt19937_64& rng);
Tensor random_normal(Shape shape, double stddev, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Convolution and GEMM primitives.
//
// conv2d uses the cross-correlation convention (kernel not flipped):
//
//   out[o, y, x] = sum_{c, i, j} in[c, y + i*dh - top, x + j*dw - left]
//                                * k[o, c, i, j]
//
// with out-of-range input positions reading as zero. Stride is always 1.
// Output height is H + top + bottom - dh*(Kh-1), width analogous.

struct Padding {
  std::size_t top = 0;
  std::size_t bottom = 0;
  std::size_t left = 0;
  std::size_t right = 0;
};

struct Dilation {
  std::size_t h = 1;
  std::size_t w = 1;
};

// Direct nested-loop convolution. input: C_in x H x W,
// kernels: C_out x C_in x Kh x Kw. The per-element reduction runs over
// (c, i, j) in ascending order.
Tensor conv2d(const Tensor& input, const Tensor& kernels, Dilation dilation,
              Padding pad);

// Same contract as conv2d; lowers the input to a column matrix and
// multiplies. Reduction order is identical to conv2d.
Tensor conv2d_im2col(const Tensor& input, const Tensor& kernels,
                     Dilation dilation, Padding pad);

// Gradient of conv2d with respect to its input.
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernels,
                         const Shape& input_shape, Dilation dilation,
                         Padding pad);

// Gradient of conv2d with respect to its kernels.
Tensor conv2d_grad_kernels(const Tensor& grad_out, const Tensor& input,
                           const Shape& kernel_shape, Dilation dilation,
                           Padding pad);

// a: M x K, b: K x N. Each output element accumulates over k ascending.
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& matrix);

}  // namespace dlc
