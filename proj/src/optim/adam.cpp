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

#include "dlc/errors.hpp"
#include "dlc/optim.hpp"

namespace dlc {

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t step,
                 const AdamOptions& opts) {
  if (grad.shape() != param.shape() || m.shape() != param.shape() ||
      v.shape() != param.shape()) {
    throw DimensionError("adam: parameter, gradient and moment shapes differ");
  }
  if (step == 0) throw StateError("adam: step count must be incremented before the update");
  const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i];
    m[i] = opts.beta1 * m[i] + (1.0 - opts.beta1) * g;
    v[i] = opts.beta2 * v[i] + (1.0 - opts.beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    param[i] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.epsilon);
  }
}

void Adam::step(const NamedParams& params) {
  if (m_.empty()) {
    for (const auto& [name, p] : params) {
      m_.push_back(Tensor::zeros_like(p->value));
      v_.push_back(Tensor::zeros_like(p->value));
    }
  }
  if (m_.size() != params.size()) {
    throw StateError("adam: parameter list changed between steps");
  }
  ++step_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i].second;
    adam_update(p.value, p.grad, m_[i], v_[i], step_, opts_);
  }
}

bool EarlyStopper::update(double val_loss) {
  ++epoch_;
  if (val_loss < best_loss_) {
    best_loss_ = val_loss;
    best_epoch_ = epoch_;
    epochs_since_best_ = 0;
    return true;
  }
  ++epochs_since_best_;
  return false;
}

}  // namespace dlc
