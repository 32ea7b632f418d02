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

#include <cmath>
#include <limits>

#include "dlc/errors.hpp"
#include "dlc/layers.hpp"

namespace dlc {

// --- LeakyRelu -------------------------------------------------------------

LeakyRelu::LeakyRelu(double slope) : slope_(slope) {
  if (!(slope >= 0.0 && slope < 1.0)) {
    throw ConfigError("lrelu: slope must lie in [0, 1), got " + std::to_string(slope));
  }
}

Tensor LeakyRelu::forward(const Tensor& input) {
  Tensor out = input;
  for (double& v : out.values()) {
    if (!(v >= 0.0)) v *= slope_;
  }
  input_ = input;
  has_cache_ = true;
  return out;
}

Tensor LeakyRelu::backward(const Tensor& grad_out) {
  consume_cache("lrelu");
  if (grad_out.shape() != input_.shape()) {
    throw DimensionError("lrelu: upstream gradient shape " + shape_str(grad_out.shape()));
  }
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i) {
    if (!(input_[i] >= 0.0)) grad_in[i] *= slope_;
  }
  input_ = Tensor();
  return grad_in;
}

void LeakyRelu::branch_state(std::vector<std::size_t>& out) const {
  for (double v : input_.values()) out.push_back(v >= 0.0);
}

// --- BatchNorm2d -----------------------------------------------------------

BatchNorm2d::BatchNorm2d(std::size_t channels, BatchNormOptions opts)
    : opts_(opts),
      gamma_(Tensor({channels}, 1.0)),
      beta_(Tensor({channels}, 0.0)),
      running_mean_({channels}, 0.0),
      running_var_({channels}, 1.0) {}

Tensor BatchNorm2d::forward(const Tensor& input) {
  if (input.rank() != 4) {
    throw DimensionError("batchnorm: expected N x C x H x W, got " +
                         shape_str(input.shape()));
  }
  const std::size_t n = input.dim(0);
  const std::size_t channels = input.dim(1);
  if (channels != gamma_.value.size()) {
    throw DimensionError("batchnorm: channel axis mismatch, input has " +
                         std::to_string(channels) + " channels, state has " +
                         std::to_string(gamma_.value.size()));
  }
  const std::size_t plane = input.dim(2) * input.dim(3);
  const std::size_t count = n * plane;
  Tensor out = Tensor::zeros_like(input);
  normalized_ = Tensor::zeros_like(input);
  inv_std_.assign(channels, 0.0);

  if (mode_ == Mode::kTrain && count < 2) {
    throw DimensionError("batchnorm: training needs at least 2 values per channel, got " +
                         std::to_string(count));
  }

  for (std::size_t c = 0; c < channels; ++c) {
    double mean;
    double var;
    if (mode_ == Mode::kTrain) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* src = input.data() + (b * channels + c) * plane;
        for (std::size_t p = 0; p < plane; ++p) s += src[p];
      }
      mean = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* src = input.data() + (b * channels + c) * plane;
        for (std::size_t p = 0; p < plane; ++p) {
          const double d = src[p] - mean;
          ss += d * d;
        }
      }
      var = ss / static_cast<double>(count);
      const double unbiased = ss / static_cast<double>(count - 1);
      running_mean_[c] = (1.0 - opts_.momentum) * running_mean_[c] + opts_.momentum * mean;
      running_var_[c] = (1.0 - opts_.momentum) * running_var_[c] + opts_.momentum * unbiased;
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double inv_std = 1.0 / std::sqrt(var + opts_.epsilon);
    inv_std_[c] = inv_std;
    const double g = gamma_.value[c];
    const double bt = beta_.value[c];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        const double xh = (input[base + p] - mean) * inv_std;
        normalized_[base + p] = xh;
        out[base + p] = g * xh + bt;
      }
    }
  }
  cached_mode_ = mode_;
  has_cache_ = true;
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  consume_cache("batchnorm");
  if (grad_out.shape() != normalized_.shape()) {
    throw DimensionError("batchnorm: upstream gradient shape " +
                         shape_str(grad_out.shape()));
  }
  const std::size_t n = normalized_.dim(0);
  const std::size_t channels = normalized_.dim(1);
  const std::size_t plane = normalized_.dim(2) * normalized_.dim(3);
  const double count = static_cast<double>(n * plane);
  Tensor grad_in = Tensor::zeros_like(grad_out);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xh = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        sum_dy += grad_out[base + p];
        sum_dy_xh += grad_out[base + p] * normalized_[base + p];
      }
    }
    gamma_.grad[c] += sum_dy_xh;
    beta_.grad[c] += sum_dy;
    const double g = gamma_.value[c];
    const double inv_std = inv_std_[c];
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t base = (b * channels + c) * plane;
      for (std::size_t p = 0; p < plane; ++p) {
        if (cached_mode_ == Mode::kTrain) {
          grad_in[base + p] = g * inv_std *
                              (grad_out[base + p] - sum_dy / count -
                               normalized_[base + p] * sum_dy_xh / count);
        } else {
          grad_in[base + p] = g * inv_std * grad_out[base + p];
        }
      }
    }
  }
  normalized_ = Tensor();
  return grad_in;
}

void BatchNorm2d::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + "gamma", &gamma_);
  out.emplace_back(prefix + "beta", &beta_);
}

void BatchNorm2d::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  out.emplace_back(prefix + "running_mean", &running_mean_);
  out.emplace_back(prefix + "running_var", &running_var_);
}

// --- MaxPoolWidth ----------------------------------------------------------

MaxPoolWidth::MaxPoolWidth(std::size_t width) : width_(width) {
  if (width == 0) throw ConfigError("maxpool: width must be positive");
}

Tensor MaxPoolWidth::forward(const Tensor& input) {
  if (input.rank() != 4) {
    throw DimensionError("maxpool: expected N x C x H x W, got " + shape_str(input.shape()));
  }
  const std::size_t w = input.dim(3);
  if (w % width_ != 0) {
    throw DimensionError("maxpool: width axis " + std::to_string(w) +
                         " not divisible by pool width " + std::to_string(width_));
  }
  const std::size_t w_out = w / width_;
  const std::size_t rows = input.dim(0) * input.dim(1) * input.dim(2);
  Tensor out({input.dim(0), input.dim(1), input.dim(2), w_out});
  argmax_.assign(out.size(), 0);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t x = 0; x < w_out; ++x) {
      std::size_t best = r * w + x * width_;
      for (std::size_t k = 1; k < width_; ++k) {
        const std::size_t idx = r * w + x * width_ + k;
        if (input[idx] > input[best]) best = idx;
      }
      out[r * w_out + x] = input[best];
      argmax_[r * w_out + x] = best;
    }
  }
  input_shape_ = input.shape();
  has_cache_ = true;
  return out;
}

Tensor MaxPoolWidth::backward(const Tensor& grad_out) {
  consume_cache("maxpool");
  if (grad_out.size() != argmax_.size()) {
    throw DimensionError("maxpool: upstream gradient shape " + shape_str(grad_out.shape()));
  }
  Tensor grad_in(input_shape_);
  for (std::size_t i = 0; i < argmax_.size(); ++i) grad_in[argmax_[i]] += grad_out[i];
  return grad_in;
}

void MaxPoolWidth::branch_state(std::vector<std::size_t>& out) const {
  out.insert(out.end(), argmax_.begin(), argmax_.end());
}

// --- Dropout ---------------------------------------------------------------

Dropout::Dropout(double p, std::uint64_t seed) : p_(p), rng_(seed) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw ConfigError("dropout: rate must lie in [0, 1), got " + std::to_string(p));
  }
}

Tensor Dropout::forward(const Tensor& input) {
  identity_ = (mode_ == Mode::kInfer || p_ == 0.0);
  has_cache_ = true;
  if (identity_) {
    mask_ = Tensor();
    return input;
  }
  mask_ = Tensor::zeros_like(input);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p_);
  Tensor out = input;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = u(rng_) < p_ ? 0.0 : keep_scale;
    mask_[i] = m;
    out[i] *= m;
  }
  return out;
}

Tensor Dropout::backward(const Tensor& grad_out) {
  consume_cache("dropout");
  if (identity_) return grad_out;
  if (grad_out.shape() != mask_.shape()) {
    throw DimensionError("dropout: upstream gradient shape " + shape_str(grad_out.shape()));
  }
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i) grad_in[i] *= mask_[i];
  return grad_in;
}

}  // namespace dlc
