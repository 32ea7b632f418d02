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

#include <algorithm>
#include <cmath>

#include "dlc/errors.hpp"
#include "dlc/model.hpp"

namespace dlc {

namespace {

void require_features(const Tensor& features, std::size_t width, const char* head) {
  if (features.rank() != 3 || features.dim(2) != width) {
    throw DimensionError(std::string(head) + ": expected N x T x " + std::to_string(width) +
                         " input, got " + shape_str(features.shape()));
  }
}

// In-place activation of one logit row.
void activate_row(std::span<double> z, Activation act) {
  if (act == Activation::kSigmoid) {
    for (double& v : z) v = sigmoid(v);
    return;
  }
  const double mx = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    total += v;
  }
  for (double& v : z) v /= total;
}

// grad w.r.t. logits given grad w.r.t. the activated row `y`.
void activation_row_backward(std::span<double> g, std::span<const double> y,
                             Activation act) {
  if (act == Activation::kSigmoid) {
    for (std::size_t j = 0; j < g.size(); ++j) g[j] *= y[j] * (1.0 - y[j]);
    return;
  }
  double inner = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) inner += g[j] * y[j];
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = y[j] * (g[j] - inner);
}

}  // namespace

// --- DilatedConvHead -------------------------------------------------------

DilatedConvHead::DilatedConvHead(std::size_t feature_width, std::size_t classes,
                                 std::size_t out_channels, std::size_t kernel_h,
                                 std::size_t kernel_w, std::size_t dilation,
                                 Activation act, TimePadding padding,
                                 std::size_t input_channels)
    : kernel_(Tensor({out_channels, input_channels, kernel_h, kernel_w})),
      cls_(out_channels * feature_width, classes, act),
      dilation_(dilation) {
  if (input_channels != 1 && input_channels != 2) {
    throw ConfigError("dilated head: input_channels must be 1 or 2");
  }
  const std::size_t span = dilation * (kernel_h - 1);
  if (padding == TimePadding::kSymmetric) {
    if (kernel_h % 2 == 0) {
      throw ConfigError("dilated head: symmetric time padding needs an odd kernel height, got " +
                        std::to_string(kernel_h));
    }
    pad_.top = span / 2;
    pad_.bottom = span / 2;
  } else {
    pad_.top = span;
    pad_.bottom = 0;
  }
  pad_.left = (kernel_w - 1) / 2;
  pad_.right = kernel_w - 1 - pad_.left;
}

Tensor DilatedConvHead::stacked_input(const Tensor& features, std::size_t n) const {
  const std::size_t t = features.dim(1);
  const std::size_t w = features.dim(2);
  Tensor in({kernel_.value.dim(1), t, w});
  const double* src = features.data() + n * t * w;
  std::copy(src, src + t * w, in.data());  // channel 1, if any, stays zero
  return in;
}

Tensor DilatedConvHead::forward(const Tensor& features, const Tensor* /*labels*/) {
  const std::size_t ko = kernel_.value.dim(0);
  const std::size_t d = cls_.weight().value.dim(1);
  const std::size_t width = d / ko;
  require_features(features, width, "dcnn");
  const std::size_t n = features.dim(0);
  const std::size_t t = features.dim(1);
  Tensor flat({n * t, d});
  for (std::size_t b = 0; b < n; ++b) {
    const Tensor out = conv2d_im2col(stacked_input(features, b), kernel_.value,
                                     {dilation_, 1}, pad_);
    // (o, s, x) -> row s, column o * W + x
    for (std::size_t o = 0; o < ko; ++o) {
      for (std::size_t s = 0; s < t; ++s) {
        const double* src = out.data() + (o * t + s) * width;
        std::copy(src, src + width, flat.data() + (b * t + s) * d + o * width);
      }
    }
  }
  Tensor pred = cls_.forward(flat);
  features_ = features;
  has_cache_ = true;
  return std::move(pred).reshaped({n, t, cls_.weight().value.dim(0)});
}

Tensor DilatedConvHead::backward(const Tensor& grad_pred) {
  if (!has_cache_) throw StateError("dcnn: backward called without a cached forward pass");
  has_cache_ = false;
  const std::size_t n = features_.dim(0);
  const std::size_t t = features_.dim(1);
  const std::size_t width = features_.dim(2);
  const std::size_t ko = kernel_.value.dim(0);
  const std::size_t d = ko * width;
  const std::size_t c = cls_.weight().value.dim(0);
  if (grad_pred.shape() != Shape{n, t, c}) {
    throw DimensionError("dcnn: upstream gradient shape " + shape_str(grad_pred.shape()));
  }
  const Tensor dflat = cls_.backward(grad_pred.reshaped({n * t, c}));
  Tensor grad_features = Tensor::zeros_like(features_);
  for (std::size_t b = 0; b < n; ++b) {
    Tensor dout({ko, t, width});
    for (std::size_t o = 0; o < ko; ++o) {
      for (std::size_t s = 0; s < t; ++s) {
        const double* src = dflat.data() + (b * t + s) * d + o * width;
        std::copy(src, src + width, dout.data() + (o * t + s) * width);
      }
    }
    const Tensor in = stacked_input(features_, b);
    kernel_.grad += conv2d_grad_kernels(dout, in, kernel_.value.shape(), {dilation_, 1}, pad_);
    const Tensor din = conv2d_grad_input(dout, kernel_.value, in.shape(), {dilation_, 1}, pad_);
    std::copy(din.data(), din.data() + t * width, grad_features.data() + b * t * width);
  }
  features_ = Tensor();
  return grad_features;
}

void DilatedConvHead::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + "kernel", &kernel_);
  cls_.collect_params(prefix + "cls.", out);
}

// --- ConditionedDilatedConvHead --------------------------------------------

ConditionedDilatedConvHead::ConditionedDilatedConvHead(
    std::size_t feature_width, std::size_t classes, std::size_t out_channels,
    std::size_t kernel_h, std::size_t kernel_w, std::size_t dilation, Activation act,
    bool teacher_forcing, bool detach_conditioning)
    : feature_width_(feature_width),
      classes_(classes),
      out_channels_(out_channels),
      kernel_h_(kernel_h),
      kernel_w_(kernel_w),
      dilation_(dilation),
      pad_left_((kernel_w - 1) / 2),
      act_(act),
      teacher_forcing_(teacher_forcing),
      detach_(detach_conditioning),
      kernel_(Tensor({out_channels, 2, kernel_h, kernel_w})),
      cls_weight_(Tensor({classes, out_channels * feature_width})),
      cls_bias_(Tensor({classes})),
      aff_weight_(Tensor({feature_width, classes})),
      aff_bias_(Tensor({feature_width})) {
  if (dilation == 0 || kernel_h == 0 || kernel_w == 0) {
    throw ConfigError("cdcnn: kernel sizes and dilation must be positive");
  }
}

Tensor ConditionedDilatedConvHead::forward(const Tensor& features, const Tensor* labels) {
  require_features(features, feature_width_, "cdcnn");
  const std::size_t n = features.dim(0);
  const std::size_t steps = features.dim(1);
  // Teacher forcing only applies when references are supplied (training);
  // otherwise the head feeds back its own predictions.
  use_labels_ = teacher_forcing_ && labels != nullptr;
  if (use_labels_) {
    if (labels->shape() != Shape{n, steps, classes_}) {
      throw DimensionError("cdcnn: teacher forcing labels must be " +
                           shape_str({n, steps, classes_}) + ", got " +
                           shape_str(labels->shape()));
    }
    labels_ = *labels;
  } else {
    labels_ = Tensor();
  }
  const auto width = static_cast<std::ptrdiff_t>(feature_width_);
  const auto kh = static_cast<std::ptrdiff_t>(kernel_h_);
  const auto kw = static_cast<std::ptrdiff_t>(kernel_w_);
  const auto xi = static_cast<std::ptrdiff_t>(dilation_);
  const auto pad_left = static_cast<std::ptrdiff_t>(pad_left_);
  const std::size_t d = out_channels_ * feature_width_;
  const std::size_t c_count = classes_;

  q_ = Tensor({n, steps, feature_width_});
  flat_ = Tensor({n, steps, d});
  pred_ = Tensor({n, steps, c_count});
  const double* k = kernel_.value.data();
  const double* wc = cls_weight_.value.data();
  const double* bc = cls_bias_.value.data();
  const double* wa = aff_weight_.value.data();
  const double* ba = aff_bias_.value.data();

  std::vector<double> z(c_count);
  for (std::size_t b = 0; b < n; ++b) {
    const double* h = features.data() + b * steps * feature_width_;
    double* q = q_.data() + b * steps * feature_width_;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto t = static_cast<std::ptrdiff_t>(s);
      double* o_row = flat_.data() + (b * steps + s) * d;
      // Dilated causal window over the two-channel stack [H', Q].
      for (std::size_t o = 0; o < out_channels_; ++o) {
        double* out = o_row + o * feature_width_;
        for (std::ptrdiff_t c = 0; c < 2; ++c) {
          const double* src = c == 0 ? h : q;
          for (std::ptrdiff_t i = 0; i < kh; ++i) {
            const std::ptrdiff_t row = t - xi * (kh - 1 - i);
            if (row < 0) continue;
            const double* src_row = src + row * width;
            for (std::ptrdiff_t j = 0; j < kw; ++j) {
              const double kv =
                  k[((static_cast<std::ptrdiff_t>(o) * 2 + c) * kh + i) * kw + j];
              const std::ptrdiff_t shift = j - pad_left;
              const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -shift);
              const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(width, width - shift);
              for (std::ptrdiff_t x = x0; x < x1; ++x) out[x] += src_row[x + shift] * kv;
            }
          }
        }
      }
      // Shared-weight classifier.
      for (std::size_t j = 0; j < c_count; ++j) {
        double acc = 0.0;
        const double* wrow = wc + j * d;
        for (std::size_t e = 0; e < d; ++e) acc += wrow[e] * o_row[e];
        z[j] = acc + bc[j];
      }
      activate_row(z, act_);
      double* y = pred_.data() + (b * steps + s) * c_count;
      std::copy(z.begin(), z.end(), y);
      // Embed the prediction (or the reference under teacher forcing) into Q[t].
      const double* src_y = use_labels_ ? labels_.data() + (b * steps + s) * c_count : y;
      double* q_row = q + s * feature_width_;
      for (std::size_t x = 0; x < feature_width_; ++x) {
        double acc = 0.0;
        for (std::size_t j = 0; j < c_count; ++j) acc += wa[x * c_count + j] * src_y[j];
        q_row[x] = acc + ba[x];
      }
    }
  }
  require_finite(pred_, "cdcnn predictions");
  features_ = features;
  has_cache_ = true;
  return pred_;
}

Tensor ConditionedDilatedConvHead::backward(const Tensor& grad_pred) {
  if (!has_cache_) throw StateError("cdcnn: backward called without a cached forward pass");
  has_cache_ = false;
  const std::size_t n = features_.dim(0);
  const std::size_t steps = features_.dim(1);
  if (grad_pred.shape() != Shape{n, steps, classes_}) {
    throw DimensionError("cdcnn: upstream gradient shape " + shape_str(grad_pred.shape()));
  }
  const auto width = static_cast<std::ptrdiff_t>(feature_width_);
  const auto kh = static_cast<std::ptrdiff_t>(kernel_h_);
  const auto kw = static_cast<std::ptrdiff_t>(kernel_w_);
  const auto xi = static_cast<std::ptrdiff_t>(dilation_);
  const auto pad_left = static_cast<std::ptrdiff_t>(pad_left_);
  const std::size_t d = out_channels_ * feature_width_;
  const std::size_t c_count = classes_;

  const double* k = kernel_.value.data();
  const double* wc = cls_weight_.value.data();
  const double* wa = aff_weight_.value.data();
  double* gk = kernel_.grad.data();
  double* gwc = cls_weight_.grad.data();
  double* gbc = cls_bias_.grad.data();
  double* gwa = aff_weight_.grad.data();
  double* gba = aff_bias_.grad.data();

  Tensor grad_features = Tensor::zeros_like(features_);
  std::vector<double> dq(steps * feature_width_);
  std::vector<double> g(c_count);
  std::vector<double> dout(d);

  for (std::size_t b = 0; b < n; ++b) {
    std::fill(dq.begin(), dq.end(), 0.0);
    const double* h = features_.data() + b * steps * feature_width_;
    const double* q = q_.data() + b * steps * feature_width_;
    double* dh = grad_features.data() + b * steps * feature_width_;
    for (std::size_t s = steps; s-- > 0;) {
      const auto t = static_cast<std::ptrdiff_t>(s);
      const double* y = pred_.data() + (b * steps + s) * c_count;
      const double* o_row = flat_.data() + (b * steps + s) * d;
      const double* gy = grad_pred.data() + (b * steps + s) * c_count;
      std::copy(gy, gy + c_count, g.begin());

      // Q[t] = W_aff * src + b_aff; dq rows for t are complete here because
      // only later steps read Q[t].
      const double* dq_row = dq.data() + s * feature_width_;
      const double* src_y = use_labels_ ? labels_.data() + (b * steps + s) * c_count : y;
      for (std::size_t x = 0; x < feature_width_; ++x) {
        const double gx = dq_row[x];
        if (gx == 0.0) continue;
        gba[x] += gx;
        for (std::size_t j = 0; j < c_count; ++j) gwa[x * c_count + j] += gx * src_y[j];
        if (!use_labels_ && !detach_) {
          for (std::size_t j = 0; j < c_count; ++j) g[j] += wa[x * c_count + j] * gx;
        }
      }

      activation_row_backward(g, std::span<const double>(y, c_count), act_);
      std::fill(dout.begin(), dout.end(), 0.0);
      for (std::size_t j = 0; j < c_count; ++j) {
        const double gz = g[j];
        gbc[j] += gz;
        double* gw_row = gwc + j * d;
        const double* w_row = wc + j * d;
        for (std::size_t e = 0; e < d; ++e) {
          gw_row[e] += gz * o_row[e];
          dout[e] += w_row[e] * gz;
        }
      }

      for (std::size_t o = 0; o < out_channels_; ++o) {
        const double* go = dout.data() + o * feature_width_;
        for (std::ptrdiff_t c = 0; c < 2; ++c) {
          const double* src = c == 0 ? h : q;
          double* dsrc = c == 0 ? dh : dq.data();
          for (std::ptrdiff_t i = 0; i < kh; ++i) {
            const std::ptrdiff_t row = t - xi * (kh - 1 - i);
            if (row < 0) continue;
            // Q[t] was still zero when step t ran.
            if (c == 1 && row == t) continue;
            const double* src_row = src + row * width;
            double* dsrc_row = dsrc + row * width;
            for (std::ptrdiff_t j = 0; j < kw; ++j) {
              const std::ptrdiff_t kidx =
                  ((static_cast<std::ptrdiff_t>(o) * 2 + c) * kh + i) * kw + j;
              const double kv = k[kidx];
              const std::ptrdiff_t shift = j - pad_left;
              const std::ptrdiff_t x0 = std::max<std::ptrdiff_t>(0, -shift);
              const std::ptrdiff_t x1 = std::min<std::ptrdiff_t>(width, width - shift);
              double acc = 0.0;
              for (std::ptrdiff_t x = x0; x < x1; ++x) {
                acc += go[x] * src_row[x + shift];
                dsrc_row[x + shift] += go[x] * kv;
              }
              gk[kidx] += acc;
            }
          }
        }
      }
    }
  }
  features_ = Tensor();
  return grad_features;
}

void ConditionedDilatedConvHead::collect_params(const std::string& prefix,
                                                NamedParams& out) {
  out.emplace_back(prefix + "kernel", &kernel_);
  out.emplace_back(prefix + "cls.weight", &cls_weight_);
  out.emplace_back(prefix + "cls.bias", &cls_bias_);
  out.emplace_back(prefix + "aff.weight", &aff_weight_);
  out.emplace_back(prefix + "aff.bias", &aff_bias_);
}

}  // namespace dlc
