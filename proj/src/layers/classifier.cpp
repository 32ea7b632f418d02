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
#include "dlc/layers.hpp"

namespace dlc {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) {
    throw DimensionError("softmax: expected M x C logits, got " + shape_str(logits.shape()));
  }
  const std::size_t m = logits.dim(0);
  const std::size_t c = logits.dim(1);
  Tensor out = logits;
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * c;
    const double mx = *std::max_element(row, row + c);
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    for (std::size_t j = 0; j < c; ++j) row[j] /= z;
  }
  return out;
}

Tensor activate(const Tensor& logits, Activation act) {
  if (act == Activation::kSoftmax) return softmax_rows(logits);
  Tensor out = logits;
  for (double& v : out.values()) v = sigmoid(v);
  return out;
}

Tensor activation_backward(const Tensor& grad_out, const Tensor& activated,
                           Activation act) {
  if (grad_out.shape() != activated.shape()) {
    throw DimensionError("activation backward: shape mismatch " +
                         shape_str(grad_out.shape()) + " vs " +
                         shape_str(activated.shape()));
  }
  Tensor grad = Tensor::zeros_like(grad_out);
  if (act == Activation::kSigmoid) {
    for (std::size_t i = 0; i < grad.size(); ++i) {
      grad[i] = grad_out[i] * activated[i] * (1.0 - activated[i]);
    }
    return grad;
  }
  const std::size_t m = activated.dim(0);
  const std::size_t c = activated.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    double inner = 0.0;
    for (std::size_t j = 0; j < c; ++j) inner += grad_out[i * c + j] * activated[i * c + j];
    for (std::size_t j = 0; j < c; ++j) {
      grad[i * c + j] = activated[i * c + j] * (grad_out[i * c + j] - inner);
    }
  }
  return grad;
}

Classifier::Classifier(std::size_t in_features, std::size_t classes, Activation act)
    : weight_(Tensor({classes, in_features})), bias_(Tensor({classes})), act_(act) {}

Tensor Classifier::forward(const Tensor& input) {
  const std::size_t d = weight_.value.dim(1);
  const std::size_t c = weight_.value.dim(0);
  if (input.rank() != 2 || input.dim(1) != d) {
    throw DimensionError("classifier: expected M x " + std::to_string(d) +
                         " input, got " + shape_str(input.shape()));
  }
  const std::size_t m = input.dim(0);
  Tensor logits = matmul(input, transpose(weight_.value));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < c; ++j) logits[i * c + j] += bias_.value[j];
  }
  output_ = activate(logits, act_);
  input_ = input;
  has_cache_ = true;
  return output_;
}

Tensor Classifier::backward(const Tensor& grad_out) {
  consume_cache("classifier");
  const Tensor dz = activation_backward(grad_out, output_, act_);
  weight_.grad += matmul(transpose(dz), input_);
  const std::size_t m = dz.dim(0);
  const std::size_t c = dz.dim(1);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < c; ++j) bias_.grad[j] += dz[i * c + j];
  }
  Tensor grad_in = matmul(dz, weight_.value);
  input_ = Tensor();
  output_ = Tensor();
  return grad_in;
}

void Classifier::collect_params(const std::string& prefix, NamedParams& out) {
  out.emplace_back(prefix + "weight", &weight_);
  out.emplace_back(prefix + "bias", &bias_);
}

}  // namespace dlc
