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

#include <cstddef>

#include "dlc/errors.hpp"
#include "dlc/layers.hpp"

namespace dlc {

void Layer::consume_cache(const char* layer_name) {
  if (!has_cache_) {
    throw StateError(std::string(layer_name) +
                     ": backward called without a cached forward pass");
  }
  has_cache_ = false;
}

void zero_grads(const NamedParams& params) {
  for (const auto& [name, p] : params) p->grad.fill(0.0);
}

namespace {

void require_rank4(const Tensor& t, const char* layer) {
  if (t.rank() != 4) {
    throw DimensionError(std::string(layer) + ": expected N x C x H x W, got " +
                         shape_str(t.shape()));
  }
}

}  // namespace

// --- DepthwiseConv2d -------------------------------------------------------

DepthwiseConv2d::DepthwiseConv2d(std::size_t channels, std::size_t kernel_h,
                                 std::size_t kernel_w, Padding pad)
    : weight_(Tensor({channels, kernel_h, kernel_w})), pad_(pad) {}

Tensor DepthwiseConv2d::forward(const Tensor& input) {
  require_rank4(input, "depthwise_conv");
  const auto& ws = weight_.value.shape();
  if (input.dim(1) != ws[0]) {
    throw DimensionError("depthwise_conv: channel axis mismatch, input has " +
                         std::to_string(input.dim(1)) + " channels but " +
                         std::to_string(ws[0]) + " kernels");
  }
  const auto n = static_cast<std::ptrdiff_t>(input.dim(0));
  const auto c_count = static_cast<std::ptrdiff_t>(input.dim(1));
  const auto h = static_cast<std::ptrdiff_t>(input.dim(2));
  const auto w = static_cast<std::ptrdiff_t>(input.dim(3));
  const auto kh = static_cast<std::ptrdiff_t>(ws[1]);
  const auto kw = static_cast<std::ptrdiff_t>(ws[2]);
  const auto top = static_cast<std::ptrdiff_t>(pad_.top);
  const auto left = static_cast<std::ptrdiff_t>(pad_.left);
  const std::ptrdiff_t h_out = h + top + static_cast<std::ptrdiff_t>(pad_.bottom) - kh + 1;
  const std::ptrdiff_t w_out = w + left + static_cast<std::ptrdiff_t>(pad_.right) - kw + 1;
  if (h_out <= 0 || w_out <= 0) {
    throw DimensionError("depthwise_conv: kernel larger than padded input " +
                         shape_str(input.shape()));
  }
  Tensor out({input.dim(0), input.dim(1), static_cast<std::size_t>(h_out),
              static_cast<std::size_t>(w_out)});
  const double* in = input.data();
  const double* k = weight_.value.data();
  double* o = out.data();
  for (std::ptrdiff_t b = 0; b < n; ++b) {
    for (std::ptrdiff_t c = 0; c < c_count; ++c) {
      const double* src = in + (b * c_count + c) * h * w;
      double* dst = o + (b * c_count + c) * h_out * w_out;
      const double* kc = k + c * kh * kw;
      for (std::ptrdiff_t i = 0; i < kh; ++i) {
        for (std::ptrdiff_t j = 0; j < kw; ++j) {
          const double kv = kc[i * kw + j];
          const std::ptrdiff_t dx = j - left;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w_out, w - dx);
          for (std::ptrdiff_t y = 0; y < h_out; ++y) {
            const std::ptrdiff_t iy = y + i - top;
            if (iy < 0 || iy >= h) continue;
            const double* srow = src + iy * w + dx;
            double* drow = dst + y * w_out;
            for (std::ptrdiff_t x = x0; x < x1; ++x) drow[x] += srow[x] * kv;
          }
        }
      }
    }
  }
  input_ = input;
  has_cache_ = true;
  return out;
}

Tensor DepthwiseConv2d::backward(const Tensor& grad_out) {
  consume_cache("depthwise_conv");
  const auto& ws = weight_.value.shape();
  const auto n = static_cast<std::ptrdiff_t>(input_.dim(0));
  const auto c_count = static_cast<std::ptrdiff_t>(input_.dim(1));
  const auto h = static_cast<std::ptrdiff_t>(input_.dim(2));
  const auto w = static_cast<std::ptrdiff_t>(input_.dim(3));
  const auto kh = static_cast<std::ptrdiff_t>(ws[1]);
  const auto kw = static_cast<std::ptrdiff_t>(ws[2]);
  const auto top = static_cast<std::ptrdiff_t>(pad_.top);
  const auto left = static_cast<std::ptrdiff_t>(pad_.left);
  const auto h_out = static_cast<std::ptrdiff_t>(grad_out.dim(2));
  const auto w_out = static_cast<std::ptrdiff_t>(grad_out.dim(3));
  Tensor grad_in = Tensor::zeros_like(input_);
  const double* in = input_.data();
  const double* go = grad_out.data();
  const double* k = weight_.value.data();
  double* gi = grad_in.data();
  double* gk = weight_.grad.data();
  for (std::ptrdiff_t b = 0; b < n; ++b) {
    for (std::ptrdiff_t c = 0; c < c_count; ++c) {
      const double* src = in + (b * c_count + c) * h * w;
      double* gsrc = gi + (b * c_count + c) * h * w;
      const double* g = go + (b * c_count + c) * h_out * w_out;
      for (std::ptrdiff_t i = 0; i < kh; ++i) {
        for (std::ptrdiff_t j = 0; j < kw; ++j) {
          const double kv = k[(c * kh + i) * kw + j];
          const std::ptrdiff_t dx = j - left;
          const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -dx);
          const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(w_out, w - dx);
          double acc = 0.0;
          for (std::ptrdiff_t y = 0; y < h_out; ++y) {
            const std::ptrdiff_t iy = y + i - top;
            if (iy < 0 || iy >= h) continue;
            const double* srow = src + iy * w + dx;
            double* gsrow = gsrc + iy * w + dx;
            const double* grow = g + y * w_out;
            for (std::ptrdiff_t x = x0; x < x1; ++x) {
              acc += grow[x] * srow[x];
              gsrow[x] += grow[x] * kv;
            }
          }
          gk[(c * kh + i) * kw + j] += acc;
        }
      }
    }
  }
  input_ = Tensor();
  return grad_in;
}

void DepthwiseConv2d::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + "weight", &weight_);
}

// --- PointwiseConv2d -------------------------------------------------------

PointwiseConv2d::PointwiseConv2d(std::size_t in_channels, std::size_t out_channels)
    : weight_(Tensor({out_channels, in_channels})) {}

Tensor PointwiseConv2d::forward(const Tensor& input) {
  require_rank4(input, "pointwise_conv");
  const std::size_t c_out = weight_.value.dim(0);
  const std::size_t c_in = weight_.value.dim(1);
  if (input.dim(1) != c_in) {
    throw DimensionError("pointwise_conv: channel axis mismatch, input has " +
                         std::to_string(input.dim(1)) + " channels, weights expect " +
                         std::to_string(c_in));
  }
  const std::size_t n = input.dim(0);
  const std::size_t plane = input.dim(2) * input.dim(3);
  Tensor out({n, c_out, input.dim(2), input.dim(3)});
  const double* z = weight_.value.data();
  for (std::size_t b = 0; b < n; ++b) {
    const double* src = input.data() + b * c_in * plane;
    double* dst = out.data() + b * c_out * plane;
    for (std::size_t o = 0; o < c_out; ++o) {
      double* drow = dst + o * plane;
      for (std::size_t c = 0; c < c_in; ++c) {
        const double zv = z[o * c_in + c];
        const double* srow = src + c * plane;
        for (std::size_t p = 0; p < plane; ++p) drow[p] += srow[p] * zv;
      }
    }
  }
  input_ = input;
  has_cache_ = true;
  return out;
}

Tensor PointwiseConv2d::backward(const Tensor& grad_out) {
  consume_cache("pointwise_conv");
  const std::size_t c_out = weight_.value.dim(0);
  const std::size_t c_in = weight_.value.dim(1);
  const std::size_t n = input_.dim(0);
  const std::size_t plane = input_.dim(2) * input_.dim(3);
  if (grad_out.shape() != Shape{n, c_out, input_.dim(2), input_.dim(3)}) {
    throw DimensionError("pointwise_conv: upstream gradient shape " +
                         shape_str(grad_out.shape()));
  }
  Tensor grad_in = Tensor::zeros_like(input_);
  const double* z = weight_.value.data();
  double* gz = weight_.grad.data();
  for (std::size_t b = 0; b < n; ++b) {
    const double* src = input_.data() + b * c_in * plane;
    const double* g = grad_out.data() + b * c_out * plane;
    double* gsrc = grad_in.data() + b * c_in * plane;
    for (std::size_t o = 0; o < c_out; ++o) {
      const double* grow = g + o * plane;
      for (std::size_t c = 0; c < c_in; ++c) {
        const double zv = z[o * c_in + c];
        const double* srow = src + c * plane;
        double* gsrow = gsrc + c * plane;
        double acc = 0.0;
        for (std::size_t p = 0; p < plane; ++p) {
          acc += grow[p] * srow[p];
          gsrow[p] += grow[p] * zv;
        }
        gz[o * c_in + c] += acc;
      }
    }
  }
  input_ = Tensor();
  return grad_in;
}

void PointwiseConv2d::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + "weight", &weight_);
}

}  // namespace dlc
