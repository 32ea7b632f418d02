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

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dlc/tensor.hpp"

namespace dlc {

enum class Mode { kTrain, kInfer };

// A trainable tensor and its gradient slot (always the same shape).
struct Param {
  Tensor value;
  Tensor grad;

  Param() = default;
  explicit Param(Tensor v) : value(std::move(v)), grad(Tensor::zeros_like(value)) {}
};

using NamedParams = std::vector<std::pair<std::string, Param*>>;
using NamedBuffers = std::vector<std::pair<std::string, Tensor*>>;

// Base class of every differentiable layer.
//
// forward() caches what backward() needs; backward() consumes the cache,
// accumulates (+=) into the parameter gradients and returns the gradient
// with respect to the layer input.
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor forward(const Tensor& input) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;

  virtual void collect_params(const std::string& /*prefix*/, NamedParams& /*out*/) {}
  // Non-trainable state that belongs in a checkpoint.
  virtual void collect_buffers(const std::string& /*prefix*/, NamedBuffers& /*out*/) {}

  virtual void set_mode(Mode mode) { mode_ = mode; }
  Mode mode() const noexcept { return mode_; }

  // Discrete choices of the last forward (activation branches, pool
  // winners). The forward map is smooth wherever these stay fixed.
  virtual void branch_state(std::vector<std::size_t>& /*out*/) const {}
  bool has_cache() const noexcept { return has_cache_; }

 protected:
  // Throws StateError if no forward is cached, then marks it consumed.
  void consume_cache(const char* layer_name);

  Mode mode_ = Mode::kTrain;
  bool has_cache_ = false;
};

void zero_grads(const NamedParams& params);

// Depthwise 2D convolution: one Kh x Kw kernel per input channel.
// Input and output are N x C x H x W.
class DepthwiseConv2d : public Layer {
 public:
  DepthwiseConv2d(std::size_t channels, std::size_t kernel_h, std::size_t kernel_w,
                  Padding pad);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;

  Param& weight() { return weight_; }
  const Padding& padding() const { return pad_; }

 private:
  Param weight_;  // C x Kh x Kw
  Padding pad_;
  Tensor input_;
};

// 1x1 convolution mixing channels: out[n,o,h,w] = sum_c in[n,c,h,w] * z[o,c].
class PointwiseConv2d : public Layer {
 public:
  PointwiseConv2d(std::size_t in_channels, std::size_t out_channels);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;

  Param& weight() { return weight_; }

 private:
  Param weight_;  // C_out x C_in
  Tensor input_;
};

// Leaky ReLU, elementwise. slope == 0 gives a plain ReLU.
class LeakyRelu : public Layer {
 public:
  explicit LeakyRelu(double slope);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_out) override;
  void branch_state(std::vector<std::size_t>& out) const override;

 private:
  double slope_;
  Tensor input_;
};

struct BatchNormOptions {
  double momentum = 0.1;
  double epsilon = 1e-5;
};

// Per-channel batch normalization over N x C x H x W.
//
// Training normalizes with the biased batch variance and updates
//   running = (1 - momentum) * running + momentum * batch_stat
// where the variance statistic is the unbiased batch variance.
// Inference normalizes with the running statistics only.
class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(std::size_t channels, BatchNormOptions opts = {});

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;
  void collect_buffers(const std::string& prefix, NamedBuffers& out) override;

  Param& gamma() { return gamma_; }
  Param& beta() { return beta_; }
  Tensor& running_mean() { return running_mean_; }
  Tensor& running_var() { return running_var_; }
  const BatchNormOptions& options() const { return opts_; }

 private:
  BatchNormOptions opts_;
  Param gamma_;
  Param beta_;
  Tensor running_mean_;
  Tensor running_var_;
  // cache
  Tensor normalized_;
  std::vector<double> inv_std_;
  Mode cached_mode_ = Mode::kTrain;
};

// Non-overlapping max pooling along the width (feature) axis with kernel and
// stride (1, width).
class MaxPoolWidth : public Layer {
 public:
  explicit MaxPoolWidth(std::size_t width);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_out) override;
  void branch_state(std::vector<std::size_t>& out) const override;

 private:
  std::size_t width_;
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

// Inverted dropout: survivors are scaled by 1 / (1 - p) during training;
// inference is the identity.
class Dropout : public Layer {
 public:
  Dropout(double p, std::uint64_t seed);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_out) override;

  void reseed(std::uint64_t seed) { rng_.seed(seed); }
  double rate() const { return p_; }

 private:
  double p_;
  std::mt19937_64 rng_;
  Tensor mask_;  // holds 0 or 1/(1-p)
  bool identity_ = true;
};

enum class Activation { kSigmoid, kSoftmax };

// Numerically stable logistic function.
double sigmoid(double x);
// Row-wise softmax of an M x C matrix, log-sum-exp stabilized.
Tensor softmax_rows(const Tensor& logits);
// Applies `act` to an M x C logit matrix.
Tensor activate(const Tensor& logits, Activation act);
// Maps the gradient w.r.t. activated outputs back to the logits.
Tensor activation_backward(const Tensor& grad_out, const Tensor& activated,
                           Activation act);

// Affine map followed by sigmoid or softmax, applied independently to every
// row of an M x D input. Weights are shared across rows (time steps).
class Classifier : public Layer {
 public:
  Classifier(std::size_t in_features, std::size_t classes, Activation act);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;

  Param& weight() { return weight_; }  // C x D
  Param& bias() { return bias_; }      // C
  Activation activation() const { return act_; }

 private:
  Param weight_;
  Param bias_;
  Activation act_;
  Tensor input_;
  Tensor output_;
};

}  // namespace dlc
