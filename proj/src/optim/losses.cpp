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
#include "dlc/optim.hpp"

namespace dlc {

namespace {

struct Geometry {
  std::size_t n, t, c;
};

Geometry check(const Tensor& pred, const Tensor& labels, std::span<const std::size_t> valid,
               const char* what) {
  if (pred.rank() != 3 || pred.shape() != labels.shape()) {
    throw DimensionError(std::string(what) + ": predictions " + shape_str(pred.shape()) +
                         " and labels " + shape_str(labels.shape()) + " must be equal N x T x C");
  }
  const Geometry g{pred.dim(0), pred.dim(1), pred.dim(2)};
  if (!valid.empty() && valid.size() != g.n) {
    throw DimensionError(std::string(what) + ": one valid count per sequence required");
  }
  for (double y : labels.values()) {
    if (y != 0.0 && y != 1.0) {
      throw DataError(std::string(what) + ": label values must be 0 or 1");
    }
  }
  return g;
}

std::size_t frames_of(std::span<const std::size_t> valid, std::size_t n, std::size_t t) {
  return valid.empty() ? t : std::min(valid[n], t);
}

}  // namespace

LossResult bce_loss(const Tensor& pred, const Tensor& labels,
                    std::span<const std::size_t> valid) {
  const auto [n, t, c] = check(pred, labels, valid, "bce loss");
  std::size_t count = 0;
  for (std::size_t b = 0; b < n; ++b) count += frames_of(valid, b, t) * c;
  LossResult r{0.0, Tensor::zeros_like(pred)};
  if (count == 0) return r;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t frames = frames_of(valid, b, t);
    for (std::size_t i = b * t * c; i < (b * t + frames) * c; ++i) {
      const double p = std::clamp(pred[i], kProbClamp, 1.0 - kProbClamp);
      const double y = labels[i];
      r.value -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
      if (p == pred[i]) r.grad[i] = (p - y) / (p * (1.0 - p)) * inv;
    }
  }
  r.value *= inv;
  return r;
}

LossResult categorical_ce_loss(const Tensor& pred, const Tensor& labels,
                               std::span<const std::size_t> valid) {
  const auto [n, t, c] = check(pred, labels, valid, "categorical loss");
  std::size_t count = 0;
  for (std::size_t b = 0; b < n; ++b) count += frames_of(valid, b, t);
  LossResult r{0.0, Tensor::zeros_like(pred)};
  if (count == 0) return r;
  const double inv = 1.0 / static_cast<double>(count);
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t frames = frames_of(valid, b, t);
    for (std::size_t i = b * t * c; i < (b * t + frames) * c; ++i) {
      if (labels[i] == 0.0) continue;
      const double p = std::clamp(pred[i], kProbClamp, 1.0 - kProbClamp);
      r.value -= labels[i] * std::log(p);
      if (p == pred[i]) r.grad[i] = -labels[i] / p * inv;
    }
  }
  r.value *= inv;
  return r;
}

LossResult loss_for(Activation act, const Tensor& pred, const Tensor& labels,
                    std::span<const std::size_t> valid) {
  return act == Activation::kSoftmax ? categorical_ce_loss(pred, labels, valid)
                                     : bce_loss(pred, labels, valid);
}

}  // namespace dlc
