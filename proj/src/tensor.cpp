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

#include "dlc/tensor.hpp"

#include <cassert>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <sstream>

#include "dlc/errors.hpp"

namespace dlc {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_numel(shape_)) {
    throw DimensionError("tensor: shape " + shape_str(shape_) + " needs " +
                         std::to_string(shape_numel(shape_)) +
                         " values, got " + std::to_string(data_.size()));
  }
}

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw DimensionError("tensor: axis " + std::to_string(axis) +
                         " out of range for rank " +
                         std::to_string(shape_.size()));
  }
  return shape_[axis];
}

std::size_t Tensor::offset(std::initializer_list<std::size_t> index) const {
  assert(index.size() == shape_.size());
  std::size_t off = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    assert(i < shape_[axis]);
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::size_t> index) {
  return data_[offset(index)];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  return data_[offset(index)];
}

Tensor Tensor::reshaped(Shape shape) const& {
  Tensor copy = *this;
  return std::move(copy).reshaped(std::move(shape));
}

Tensor Tensor::reshaped(Shape shape) && {
  if (shape_numel(shape) != data_.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(shape_) + " as " +
                         shape_str(shape));
  }
  shape_ = std::move(shape);
  return std::move(*this);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

}  // namespace

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "add");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "sub");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double scale) {
  for (double& v : data_) v *= scale;
  return *this;
}

Tensor operator+(Tensor lhs, const Tensor& rhs) { return lhs += rhs; }
Tensor operator-(Tensor lhs, const Tensor& rhs) { return lhs -= rhs; }
Tensor operator*(double scale, Tensor t) { return t *= scale; }

double max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

double sum(const Tensor& t) {
  double s = 0.0;
  for (double v : t.values()) s += v;
  return s;
}

double dot(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void require_finite(const Tensor& t, std::string_view what) {
  if (!t.all_finite()) {
    throw NumericalError("non-finite value in " + std::string(what));
  }
}

Tensor random_uniform(Shape shape, double lo, double hi, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

Tensor random_normal(Shape shape, double stddev, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

// ---------------------------------------------------------------------------

namespace {

struct ConvGeometry {
  std::ptrdiff_t c_in, h, w;
  std::ptrdiff_t c_out, kh, kw;
  std::ptrdiff_t dh, dw;
  std::ptrdiff_t top, left;
  std::ptrdiff_t h_out, w_out;
};

ConvGeometry conv_geometry(const Shape& input, const Shape& kernels,
                           Dilation dil, Padding pad, const char* op) {
  const std::string name(op);
  if (input.size() != 3) {
    throw DimensionError(name + ": input must be C_in x H x W, got " +
                         shape_str(input));
  }
  if (kernels.size() != 4) {
    throw DimensionError(name + ": kernels must be C_out x C_in x Kh x Kw, got " +
                         shape_str(kernels));
  }
  if (kernels[1] != input[0]) {
    throw DimensionError(name + ": channel axis mismatch, input has " +
                         std::to_string(input[0]) + " channels but kernels expect " +
                         std::to_string(kernels[1]));
  }
  if (dil.h == 0 || dil.w == 0) {
    throw DimensionError(name + ": dilation must be positive");
  }
  if (kernels[2] == 0 || kernels[3] == 0) {
    throw DimensionError(name + ": empty kernel " + shape_str(kernels));
  }
  const std::size_t span_h = dil.h * (kernels[2] - 1) + 1;
  const std::size_t span_w = dil.w * (kernels[3] - 1) + 1;
  const std::size_t padded_h = input[1] + pad.top + pad.bottom;
  const std::size_t padded_w = input[2] + pad.left + pad.right;
  if (padded_h < span_h) {
    throw DimensionError(name + ": height axis too small, padded height " +
                         std::to_string(padded_h) + " < dilated kernel span " +
                         std::to_string(span_h));
  }
  if (padded_w < span_w) {
    throw DimensionError(name + ": width axis too small, padded width " +
                         std::to_string(padded_w) + " < dilated kernel span " +
                         std::to_string(span_w));
  }
  ConvGeometry g{};
  g.c_in = static_cast<std::ptrdiff_t>(input[0]);
  g.h = static_cast<std::ptrdiff_t>(input[1]);
  g.w = static_cast<std::ptrdiff_t>(input[2]);
  g.c_out = static_cast<std::ptrdiff_t>(kernels[0]);
  g.kh = static_cast<std::ptrdiff_t>(kernels[2]);
  g.kw = static_cast<std::ptrdiff_t>(kernels[3]);
  g.dh = static_cast<std::ptrdiff_t>(dil.h);
  g.dw = static_cast<std::ptrdiff_t>(dil.w);
  g.top = static_cast<std::ptrdiff_t>(pad.top);
  g.left = static_cast<std::ptrdiff_t>(pad.left);
  g.h_out = static_cast<std::ptrdiff_t>(padded_h - span_h + 1);
  g.w_out = static_cast<std::ptrdiff_t>(padded_w - span_w + 1);
  return g;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, Dilation dilation,
              Padding pad) {
  const auto g = conv_geometry(input.shape(), kernels.shape(), dilation, pad,
                               "conv2d");
  Tensor out({static_cast<std::size_t>(g.c_out),
              static_cast<std::size_t>(g.h_out),
              static_cast<std::size_t>(g.w_out)});
  const double* in = input.data();
  const double* k = kernels.data();
  double* o = out.data();
  for (std::ptrdiff_t oc = 0; oc < g.c_out; ++oc) {
    double* plane = o + oc * g.h_out * g.w_out;
    for (std::ptrdiff_t c = 0; c < g.c_in; ++c) {
      for (std::ptrdiff_t i = 0; i < g.kh; ++i) {
        for (std::ptrdiff_t j = 0; j < g.kw; ++j) {
          const double kv = k[((oc * g.c_in + c) * g.kh + i) * g.kw + j];
          for (std::ptrdiff_t y = 0; y < g.h_out; ++y) {
            const std::ptrdiff_t iy = y + i * g.dh - g.top;
            if (iy < 0 || iy >= g.h) continue;
            for (std::ptrdiff_t x = 0; x < g.w_out; ++x) {
              const std::ptrdiff_t ix = x + j * g.dw - g.left;
              if (ix < 0 || ix >= g.w) continue;
              plane[y * g.w_out + x] += in[(c * g.h + iy) * g.w + ix] * kv;
            }
          }
        }
      }
    }
  }
  require_finite(out, "conv2d output");
  return out;
}

Tensor conv2d_im2col(const Tensor& input, const Tensor& kernels,
                     Dilation dilation, Padding pad) {
  const auto g = conv_geometry(input.shape(), kernels.shape(), dilation, pad,
                               "conv2d_im2col");
  const std::ptrdiff_t rows = g.c_in * g.kh * g.kw;
  const std::ptrdiff_t cols = g.h_out * g.w_out;
  Tensor columns({static_cast<std::size_t>(rows), static_cast<std::size_t>(cols)});
  const double* in = input.data();
  double* col = columns.data();
  for (std::ptrdiff_t c = 0; c < g.c_in; ++c) {
    for (std::ptrdiff_t i = 0; i < g.kh; ++i) {
      for (std::ptrdiff_t j = 0; j < g.kw; ++j) {
        double* dst = col + ((c * g.kh + i) * g.kw + j) * cols;
        for (std::ptrdiff_t y = 0; y < g.h_out; ++y) {
          const std::ptrdiff_t iy = y + i * g.dh - g.top;
          double* row = dst + y * g.w_out;
          if (iy < 0 || iy >= g.h) continue;  // stays zero
          const double* src = in + (c * g.h + iy) * g.w;
          // Valid x range where 0 <= x + j*dw - left < w.
          const std::ptrdiff_t shift = j * g.dw - g.left;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -shift);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(g.w_out, g.w - shift);
          for (std::ptrdiff_t x = x0; x < x1; ++x) row[x] = src[x + shift];
        }
      }
    }
  }
  Tensor weights = kernels.reshaped(
      {static_cast<std::size_t>(g.c_out), static_cast<std::size_t>(rows)});
  Tensor out = matmul(weights, columns);
  return std::move(out).reshaped({static_cast<std::size_t>(g.c_out),
                                  static_cast<std::size_t>(g.h_out),
                                  static_cast<std::size_t>(g.w_out)});
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& kernels,
                         const Shape& input_shape, Dilation dilation,
                         Padding pad) {
  const auto g = conv_geometry(input_shape, kernels.shape(), dilation, pad,
                               "conv2d_grad_input");
  const Shape expected{static_cast<std::size_t>(g.c_out),
                       static_cast<std::size_t>(g.h_out),
                       static_cast<std::size_t>(g.w_out)};
  if (grad_out.shape() != expected) {
    throw DimensionError("conv2d_grad_input: upstream gradient is " +
                         shape_str(grad_out.shape()) + ", expected " +
                         shape_str(expected));
  }
  Tensor grad_in(input_shape);
  const double* go = grad_out.data();
  const double* k = kernels.data();
  double* gi = grad_in.data();
  for (std::ptrdiff_t oc = 0; oc < g.c_out; ++oc) {
    const double* plane = go + oc * g.h_out * g.w_out;
    for (std::ptrdiff_t c = 0; c < g.c_in; ++c) {
      for (std::ptrdiff_t i = 0; i < g.kh; ++i) {
        for (std::ptrdiff_t j = 0; j < g.kw; ++j) {
          const double kv = k[((oc * g.c_in + c) * g.kh + i) * g.kw + j];
          for (std::ptrdiff_t y = 0; y < g.h_out; ++y) {
            const std::ptrdiff_t iy = y + i * g.dh - g.top;
            if (iy < 0 || iy >= g.h) continue;
            for (std::ptrdiff_t x = 0; x < g.w_out; ++x) {
              const std::ptrdiff_t ix = x + j * g.dw - g.left;
              if (ix < 0 || ix >= g.w) continue;
              gi[(c * g.h + iy) * g.w + ix] += plane[y * g.w_out + x] * kv;
            }
          }
        }
      }
    }
  }
  return grad_in;
}

Tensor conv2d_grad_kernels(const Tensor& grad_out, const Tensor& input,
                           const Shape& kernel_shape, Dilation dilation,
                           Padding pad) {
  const auto g = conv_geometry(input.shape(), kernel_shape, dilation, pad,
                               "conv2d_grad_kernels");
  const Shape expected{static_cast<std::size_t>(g.c_out),
                       static_cast<std::size_t>(g.h_out),
                       static_cast<std::size_t>(g.w_out)};
  if (grad_out.shape() != expected) {
    throw DimensionError("conv2d_grad_kernels: upstream gradient is " +
                         shape_str(grad_out.shape()) + ", expected " +
                         shape_str(expected));
  }
  Tensor grad_k(kernel_shape);
  const double* go = grad_out.data();
  const double* in = input.data();
  double* gk = grad_k.data();
  for (std::ptrdiff_t oc = 0; oc < g.c_out; ++oc) {
    const double* plane = go + oc * g.h_out * g.w_out;
    for (std::ptrdiff_t c = 0; c < g.c_in; ++c) {
      for (std::ptrdiff_t i = 0; i < g.kh; ++i) {
        for (std::ptrdiff_t j = 0; j < g.kw; ++j) {
          double acc = 0.0;
          for (std::ptrdiff_t y = 0; y < g.h_out; ++y) {
            const std::ptrdiff_t iy = y + i * g.dh - g.top;
            if (iy < 0 || iy >= g.h) continue;
            for (std::ptrdiff_t x = 0; x < g.w_out; ++x) {
              const std::ptrdiff_t ix = x + j * g.dw - g.left;
              if (ix < 0 || ix >= g.w) continue;
              acc += plane[y * g.w_out + x] * in[(c * g.h + iy) * g.w + ix];
            }
          }
          gk[((oc * g.c_in + c) * g.kh + i) * g.kw + j] = acc;
        }
      }
    }
  }
  return grad_k;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw DimensionError("matmul: operands must be matrices, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0);
  const std::size_t kdim = a.dim(1);
  const std::size_t n = b.dim(1);
  if (b.dim(0) != kdim) {
    throw DimensionError("matmul: inner dimension mismatch " +
                         shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  Tensor out({m, n});
  const double* __restrict pa = a.data();
  const double* __restrict pb = b.data();
  double* __restrict po = out.data();
  for (std::size_t i = 0; i < m; ++i) {
    double* row = po + i * n;
    for (std::size_t k = 0; k < kdim; ++k) {
      const double av = pa[i * kdim + k];
      const double* brow = pb + k * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
  require_finite(out, "matmul output");
  return out;
}

Tensor transpose(const Tensor& matrix) {
  if (matrix.rank() != 2) {
    throw DimensionError("transpose: expected a matrix, got " +
                         shape_str(matrix.shape()));
  }
  const std::size_t r = matrix.dim(0);
  const std::size_t c = matrix.dim(1);
  Tensor out({c, r});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = matrix[i * c + j];
  }
  return out;
}

}  // namespace dlc
