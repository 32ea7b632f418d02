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

#include <numeric>

#include "dlc/errors.hpp"
#include "dlc/model.hpp"

namespace dlc {

std::size_t ModelConfig::feature_width() const {
  const std::size_t pooled = std::accumulate(pool_widths.begin(), pool_widths.end(),
                                             std::size_t{1}, std::multiplies<>());
  if (channels.empty() || pooled == 0) return 0;
  return channels.back() * (num_features / pooled);
}

void ModelConfig::validate() const {
  if (channels.empty()) throw ConfigError("model.channels: at least one block is required");
  for (std::size_t c : channels) {
    if (c == 0) throw ConfigError("model.channels: channel counts must be positive");
  }
  if (pool_widths.size() != channels.size()) {
    throw ConfigError("model.pools: need one pool width per block (" +
                      std::to_string(channels.size()) + "), got " +
                      std::to_string(pool_widths.size()));
  }
  std::size_t pooled = 1;
  for (std::size_t p : pool_widths) {
    if (p == 0) throw ConfigError("model.pools: pool widths must be positive");
    pooled *= p;
  }
  if (num_features == 0 || num_features % pooled != 0) {
    throw ConfigError("model.pools: product of pool widths (" + std::to_string(pooled) +
                      ") must divide the feature count (" + std::to_string(num_features) +
                      ")");
  }
  if (dw_kernel_h == 0 || dw_kernel_w == 0) {
    throw ConfigError("model.dw_kernel: kernel size must be positive");
  }
  if (kernel_h == 0 || kernel_h % 2 == 0) {
    throw ConfigError("model.kernel_h: temporal kernel height must be odd, got " +
                      std::to_string(kernel_h));
  }
  if (kernel_w == 0) throw ConfigError("model.kernel_w: must be positive");
  if (dilation == 0) throw ConfigError("model.dilation: must be >= 1");
  if (temporal_channels == 0) throw ConfigError("model.temporal_channels: must be positive");
  if (num_classes == 0) throw ConfigError("model.classes: must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) {
    throw ConfigError("model.dropout: must lie in [0, 1)");
  }
  if (!(lrelu_slope >= 0.0 && lrelu_slope < 1.0)) {
    throw ConfigError("model.lrelu_slope: must lie in [0, 1)");
  }
  if (!(bn_epsilon > 0.0)) throw ConfigError("model.bn_epsilon: must be positive");
  if (!(bn_momentum >= 0.0 && bn_momentum <= 1.0)) {
    throw ConfigError("model.bn_momentum: must lie in [0, 1]");
  }
}

namespace {

Padding same_padding(std::size_t kh, std::size_t kw) {
  Padding p;
  p.top = (kh - 1) / 2;
  p.bottom = kh - 1 - p.top;
  p.left = (kw - 1) / 2;
  p.right = kw - 1 - p.left;
  return p;
}

}  // namespace

DwsBlock::DwsBlock(std::size_t in_channels, std::size_t out_channels,
                   const ModelConfig& cfg, std::size_t pool_width,
                   std::uint64_t dropout_seed)
    : depthwise_(in_channels, cfg.dw_kernel_h, cfg.dw_kernel_w,
                 same_padding(cfg.dw_kernel_h, cfg.dw_kernel_w)),
      lrelu_(cfg.lrelu_slope),
      bn1_(in_channels, {cfg.bn_momentum, cfg.bn_epsilon}),
      pointwise_(in_channels, out_channels),
      relu_(0.0),
      bn2_(out_channels, {cfg.bn_momentum, cfg.bn_epsilon}),
      pool_(pool_width),
      dropout_(cfg.dropout, dropout_seed) {}

Tensor DwsBlock::forward(const Tensor& input) {
  Tensor x = depthwise_.forward(input);
  x = lrelu_.forward(x);
  x = bn1_.forward(x);
  x = pointwise_.forward(x);
  x = relu_.forward(x);
  x = bn2_.forward(x);
  x = pool_.forward(x);
  x = dropout_.forward(x);
  has_cache_ = true;
  return x;
}

Tensor DwsBlock::backward(const Tensor& grad_out) {
  consume_cache("dws_block");
  Tensor g = dropout_.backward(grad_out);
  g = pool_.backward(g);
  g = bn2_.backward(g);
  g = relu_.backward(g);
  g = pointwise_.backward(g);
  g = bn1_.backward(g);
  g = lrelu_.backward(g);
  return depthwise_.backward(g);
}

void DwsBlock::collect_params(const std::string& prefix, NamedParams& out) {
  depthwise_.collect_params(prefix + "depthwise.", out);
  bn1_.collect_params(prefix + "bn_depthwise.", out);
  pointwise_.collect_params(prefix + "pointwise.", out);
  bn2_.collect_params(prefix + "bn_pointwise.", out);
}

void DwsBlock::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  bn1_.collect_buffers(prefix + "bn_depthwise.", out);
  bn2_.collect_buffers(prefix + "bn_pointwise.", out);
}

void DwsBlock::branch_state(std::vector<std::size_t>& out) const {
  lrelu_.branch_state(out);
  relu_.branch_state(out);
  pool_.branch_state(out);
}

void DwsBlock::set_mode(Mode mode) {
  Layer::set_mode(mode);
  depthwise_.set_mode(mode);
  lrelu_.set_mode(mode);
  bn1_.set_mode(mode);
  pointwise_.set_mode(mode);
  relu_.set_mode(mode);
  bn2_.set_mode(mode);
  pool_.set_mode(mode);
  dropout_.set_mode(mode);
}

// --- FeatureExtractor ------------------------------------------------------

FeatureExtractor::FeatureExtractor(const ModelConfig& cfg, std::uint64_t seed) {
  std::size_t in_channels = 1;
  for (std::size_t l = 0; l < cfg.blocks(); ++l) {
    blocks_.push_back(std::make_unique<DwsBlock>(in_channels, cfg.channels[l], cfg,
                                                 cfg.pool_widths[l],
                                                 seed * 7919u + 101u * (l + 1)));
    in_channels = cfg.channels[l];
  }
}

Tensor FeatureExtractor::forward(const Tensor& features) {
  if (features.rank() != 3) {
    throw DimensionError("feature extractor: expected N x T x F input, got " +
                         shape_str(features.shape()));
  }
  const std::size_t n = features.dim(0);
  const std::size_t t = features.dim(1);
  Tensor x = features.reshaped({n, 1, t, features.dim(2)});
  for (auto& block : blocks_) x = block->forward(x);
  last_block_shape_ = x.shape();
  const std::size_t c = x.dim(1);
  const std::size_t w = x.dim(3);
  if (x.dim(2) != t) {
    throw DimensionError("feature extractor: time axis changed from " + std::to_string(t) +
                         " to " + std::to_string(x.dim(2)));
  }
  // (n, c, t, w) -> (n, t, c * w)
  Tensor out({n, t, c * w});
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t s = 0; s < t; ++s) {
        const double* src = x.data() + ((b * c + ch) * t + s) * w;
        double* dst = out.data() + (b * t + s) * c * w + ch * w;
        std::copy(src, src + w, dst);
      }
    }
  }
  return out;
}

Tensor FeatureExtractor::backward(const Tensor& grad_out) {
  if (last_block_shape_.empty()) {
    throw StateError("feature extractor: backward called without a cached forward pass");
  }
  const std::size_t n = last_block_shape_[0];
  const std::size_t c = last_block_shape_[1];
  const std::size_t t = last_block_shape_[2];
  const std::size_t w = last_block_shape_[3];
  if (grad_out.shape() != Shape{n, t, c * w}) {
    throw DimensionError("feature extractor: upstream gradient shape " +
                         shape_str(grad_out.shape()));
  }
  Tensor g(last_block_shape_);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t s = 0; s < t; ++s) {
        const double* src = grad_out.data() + (b * t + s) * c * w + ch * w;
        double* dst = g.data() + ((b * c + ch) * t + s) * w;
        std::copy(src, src + w, dst);
      }
    }
  }
  last_block_shape_.clear();
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) g = (*it)->backward(g);
  const std::size_t f = g.dim(3);
  return std::move(g).reshaped({n, t, f});
}

void FeatureExtractor::collect_params(const std::string& prefix, NamedParams& out) {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    blocks_[l]->collect_params(prefix + "block" + std::to_string(l) + ".", out);
  }
}

void FeatureExtractor::collect_buffers(const std::string& prefix, NamedBuffers& out) {
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    blocks_[l]->collect_buffers(prefix + "block" + std::to_string(l) + ".", out);
  }
}

void FeatureExtractor::branch_state(std::vector<std::size_t>& out) const {
  for (const auto& block : blocks_) block->branch_state(out);
}

void FeatureExtractor::set_mode(Mode mode) {
  for (auto& block : blocks_) block->set_mode(mode);
}

}  // namespace dlc
