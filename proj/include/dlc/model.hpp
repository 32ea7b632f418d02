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
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "dlc/layers.hpp"
#include "dlc/tensor.hpp"

namespace dlc {

/// Architectural hyper-parameters of the detector.
///
/// Defaults reproduce the published configuration shape: three DWS blocks
/// with 5x5 depthwise kernels, width pooling 5/4/2 (40 -> 8 -> 2 -> 1),
/// dropout 0.25, LReLU slope 1e-2, and a 3x3 temporal kernel with time
/// dilation 10.
struct ModelConfig {
  std::vector<std::size_t> channels{256, 256, 256};  // one entry per block
  std::size_t dw_kernel_h = 5;
  std::size_t dw_kernel_w = 5;
  std::vector<std::size_t> pool_widths{5, 4, 2};
  double dropout = 0.25;
  double lrelu_slope = 1e-2;
  double bn_momentum = 0.1;
  double bn_epsilon = 1e-5;

  std::size_t kernel_h = 3;  // temporal conv kernel height (time)
  std::size_t kernel_w = 3;  // temporal conv kernel width (features)
  std::size_t temporal_channels = 64;
  std::size_t dilation = 10;

  std::size_t num_features = 40;
  std::size_t num_classes = 16;

  bool conditioning = true;
  bool teacher_forcing = false;
  bool detach_conditioning = false;
  Activation activation = Activation::kSigmoid;

  std::size_t blocks() const { return channels.size(); }
  // Width of the reshaped extractor output: channels.back() * (F / prod(pools)).
  std::size_t feature_width() const;

  // Throws ConfigError naming the first violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Time padding used by the unconditioned dilated convolution.
enum class TimePadding {
  kSymmetric,  // dilation*(Kh-1)/2 rows on each side
  kCausal,     // dilation*(Kh-1) rows on top only
};

// --- Feature extractor -----------------------------------------------------

// depthwise conv -> LReLU -> BN -> pointwise conv -> ReLU -> BN
//   -> max-pool over width -> dropout
class DwsBlock : public Layer {
 public:
  DwsBlock(std::size_t in_channels, std::size_t out_channels, const ModelConfig& cfg,
           std::size_t pool_width, std::uint64_t dropout_seed);

  Tensor forward(const Tensor& input) override;
  Tensor backward(const Tensor& grad_out) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;
  void collect_buffers(const std::string& prefix, NamedBuffers& out) override;
  void set_mode(Mode mode) override;
  void branch_state(std::vector<std::size_t>& out) const override;

  DepthwiseConv2d& depthwise() { return depthwise_; }
  PointwiseConv2d& pointwise() { return pointwise_; }
  BatchNorm2d& bn_depthwise() { return bn1_; }
  BatchNorm2d& bn_pointwise() { return bn2_; }
  Dropout& dropout() { return dropout_; }

 private:
  DepthwiseConv2d depthwise_;
  LeakyRelu lrelu_;
  BatchNorm2d bn1_;
  PointwiseConv2d pointwise_;
  LeakyRelu relu_;
  BatchNorm2d bn2_;
  MaxPoolWidth pool_;
  Dropout dropout_;
};

// Stack of DWS blocks. Maps N x T x F features to N x T x W_f, where the
// last block's (channel, width) axes are flattened channel-major.
class FeatureExtractor {
 public:
  FeatureExtractor(const ModelConfig& cfg, std::uint64_t seed);

  Tensor forward(const Tensor& features);
  Tensor backward(const Tensor& grad_out);
  void collect_params(const std::string& prefix, NamedParams& out);
  void collect_buffers(const std::string& prefix, NamedBuffers& out);
  void set_mode(Mode mode);
  void branch_state(std::vector<std::size_t>& out) const;

  std::vector<std::unique_ptr<DwsBlock>>& blocks() { return blocks_; }

 private:
  std::vector<std::unique_ptr<DwsBlock>> blocks_;
  Shape last_block_shape_;
};

// --- Temporal heads --------------------------------------------------------

// A temporal pattern identifier followed by the shared-weight classifier.
// Maps H' (N x T x W_f) to predictions (N x T x C).
class TemporalHead {
 public:
  virtual ~TemporalHead() = default;
  // `labels` (N x T x C) is only consulted by teacher forcing.
  virtual Tensor forward(const Tensor& features, const Tensor* labels) = 0;
  virtual Tensor backward(const Tensor& grad_pred) = 0;
  virtual void collect_params(const std::string& prefix, NamedParams& out) = 0;
};

// Unconditioned time-dilated convolution (the "Base" model):
// conv over (time, feature) with dilation (xi, 1), output reshaped to one
// K_o * W_f vector per step, classified with shared weights.
//
// With input_channels == 2 the second input channel is all zeros; combined
// with causal padding this is the reference the conditioned head reduces to
// when its affine embedding is zero.
class DilatedConvHead : public TemporalHead {
 public:
  DilatedConvHead(std::size_t feature_width, std::size_t classes,
                  std::size_t out_channels, std::size_t kernel_h, std::size_t kernel_w,
                  std::size_t dilation, Activation act,
                  TimePadding padding = TimePadding::kSymmetric,
                  std::size_t input_channels = 1);

  Tensor forward(const Tensor& features, const Tensor* labels) override;
  Tensor backward(const Tensor& grad_pred) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;

  Param& kernel() { return kernel_; }
  Classifier& classifier() { return cls_; }
  Padding padding() const { return pad_; }

 private:
  Tensor stacked_input(const Tensor& features, std::size_t n) const;

  Param kernel_;  // K_o x C_in x Kh x Kw
  Classifier cls_;
  std::size_t dilation_;
  Padding pad_;
  Tensor features_;
  bool has_cache_ = false;
};

// Conditioned time-dilated convolution.
//
// Runs sequentially over time. Step t reads a causal dilated window of K_h
// rows {t - xi*(K_h-1), ..., t - xi, t} from the two-channel stack
// [H', Q] (rows before 0 read as zero), convolves it with K_o kernels of
// shape 2 x K_h x K_w (width padded to keep W_f columns), flattens,
// classifies, and finally writes Q[t] = W_aff * y_t + b_aff. Step t thus
// never sees Q[t] itself, only embeddings of earlier predictions.
//
// backward() propagates through the whole chain: the gradient reaching
// Q[t] from later steps flows into W_aff, b_aff and (unless detached) back
// into prediction t and everything that produced it.
class ConditionedDilatedConvHead : public TemporalHead {
 public:
  ConditionedDilatedConvHead(std::size_t feature_width, std::size_t classes,
                             std::size_t out_channels, std::size_t kernel_h,
                             std::size_t kernel_w, std::size_t dilation,
                             Activation act, bool teacher_forcing = false,
                             bool detach_conditioning = false);

  Tensor forward(const Tensor& features, const Tensor* labels) override;
  Tensor backward(const Tensor& grad_pred) override;
  void collect_params(const std::string& prefix, NamedParams& out) override;

  Param& kernel() { return kernel_; }          // K_o x 2 x Kh x Kw
  Param& cls_weight() { return cls_weight_; }  // C x (K_o * W_f)
  Param& cls_bias() { return cls_bias_; }      // C
  Param& aff_weight() { return aff_weight_; }  // W_f x C
  Param& aff_bias() { return aff_bias_; }      // W_f

  // Conditioning channel from the last forward pass (N x T x W_f).
  const Tensor& conditioning() const { return q_; }

 private:
  std::size_t feature_width_;
  std::size_t classes_;
  std::size_t out_channels_;
  std::size_t kernel_h_;
  std::size_t kernel_w_;
  std::size_t dilation_;
  std::size_t pad_left_;
  Activation act_;
  bool teacher_forcing_;
  bool detach_;

  Param kernel_;
  Param cls_weight_;
  Param cls_bias_;
  Param aff_weight_;
  Param aff_bias_;

  // cache
  Tensor features_;   // N x T x W_f
  Tensor q_;          // N x T x W_f
  Tensor flat_;       // N x T x (K_o * W_f)
  Tensor pred_;       // N x T x C
  Tensor labels_;     // N x T x C (teacher forcing)
  bool use_labels_ = false;
  bool has_cache_ = false;
};

// --- Full model ------------------------------------------------------------

struct ModelState {
  ModelConfig config;
  std::vector<std::pair<std::string, Tensor>> tensors;  // params then buffers
};

class SedModel {
 public:
  SedModel(ModelConfig cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // features: N x T x F. Returns predictions N x T x C in [0, 1].
  Tensor forward(const Tensor& features, const Tensor* labels = nullptr);
  // Returns the gradient w.r.t. the input features.
  Tensor backward(const Tensor& grad_pred);

  void set_mode(Mode mode);
  Mode mode() const { return mode_; }

  NamedParams params();
  NamedBuffers buffers();

  ModelState state();
  // Throws DataError on a config mismatch or a missing/misshapen tensor.
  void load_state(const ModelState& state);

  // Re-seeds every dropout generator; used to make a forward reproducible.
  void reseed_dropout(std::uint64_t seed);
  // Branch state of the last forward (see Layer::branch_state).
  std::vector<std::size_t> branch_state() const;

  FeatureExtractor& extractor() { return extractor_; }
  TemporalHead& head() { return *head_; }

 private:
  ModelConfig cfg_;
  FeatureExtractor extractor_;
  std::unique_ptr<TemporalHead> head_;
  Mode mode_ = Mode::kTrain;
};

// Fills every parameter with the default initialization:
// U(-1/sqrt(fan_in), 1/sqrt(fan_in)); BN scale 1, shift 0.
void initialize_parameters(SedModel& model, std::uint64_t seed);

// --- Parameter counting ----------------------------------------------------

struct ParamCount {
  std::vector<std::pair<std::string, std::size_t>> components;
  std::size_t total = 0;
};

ParamCount param_count(const ModelConfig& cfg);

// Standard convolution versus its depthwise-separable factorization for
// matched shapes (no biases).
struct DwsComparison {
  std::size_t standard = 0;  // C_out * C_in * Kh * Kw
  std::size_t separable = 0; // C_in * Kh * Kw + C_out * C_in
  double ratio = 0.0;        // separable / standard
  // Closed form 1/C_out + 1/(Kh*Kw) as an exact fraction.
  std::size_t factor_numerator = 0;
  std::size_t factor_denominator = 0;

  // True iff separable/standard == factor_numerator/factor_denominator
  // (integer cross-multiplication, no rounding).
  bool matches_factor() const;
};

DwsComparison compare_dws(std::size_t kernel_h, std::size_t kernel_w,
                          std::size_t in_channels, std::size_t out_channels);

}  // namespace dlc
