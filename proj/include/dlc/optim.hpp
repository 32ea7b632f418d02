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
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "dlc/data.hpp"
#include "dlc/model.hpp"

namespace dlc {

inline constexpr double kProbClamp = 1e-7;

struct LossResult {
  double value = 0.0;
  Tensor grad;  // d value / d predictions, same shape as the predictions
};

// Predictions and labels are N x T x C. Frames at or beyond valid[n] are
// excluded; an empty `valid` means every frame counts. Predictions are
// clamped to [kProbClamp, 1 - kProbClamp]; the gradient is the exact
// derivative of the clamped loss, so it vanishes where the clamp is active.
//
// Mean over the counted N*T*C elements of -[y ln p + (1 - y) ln(1 - p)].
LossResult bce_loss(const Tensor& pred, const Tensor& labels,
                    std::span<const std::size_t> valid = {});
// Mean over the counted frames of -sum_c y_c ln p_c.
LossResult categorical_ce_loss(const Tensor& pred, const Tensor& labels,
                               std::span<const std::size_t> valid = {});
// bce_loss for sigmoid heads, categorical_ce_loss for softmax heads.
LossResult loss_for(Activation act, const Tensor& pred, const Tensor& labels,
                    std::span<const std::size_t> valid = {});

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const AdamOptions&) const = default;
};

// One bias-corrected Adam update of a single tensor. `step` is the already
// incremented step count (>= 1).
void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t step,
                 const AdamOptions& opts);

class Adam {
 public:
  explicit Adam(AdamOptions opts = {}) : opts_(opts) {}

  // Increments the step count, then updates every parameter from its grad.
  // Moments are created on the first call and bound to parameter order.
  void step(const NamedParams& params);

  std::uint64_t steps() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }
  const AdamOptions& options() const { return opts_; }

 private:
  AdamOptions opts_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

// Improvement means a strictly lower validation loss.
class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience) : patience_(patience) {}

  // Records one epoch; returns true if it is the new best.
  bool update(double val_loss);
  bool should_stop() const { return epochs_since_best_ >= patience_; }

  double best_loss() const { return best_loss_; }
  std::size_t best_epoch() const { return best_epoch_; }  // 1-based, 0 before any update
  std::size_t epochs_since_best() const { return epochs_since_best_; }
  std::size_t patience() const { return patience_; }

 private:
  std::size_t patience_;
  double best_loss_ = std::numeric_limits<double>::infinity();
  std::size_t best_epoch_ = 0;
  std::size_t epochs_since_best_ = 0;
  std::size_t epoch_ = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_time = 0.0;  // seconds since training started
  std::uint64_t seed = 0;
};

// One JSON object on a single line, no trailing newline.
std::string to_ndjson(const EpochRecord& record);

struct TrainOptions {
  std::size_t max_epochs = 1000;
  std::size_t batch_size = 16;
  std::size_t patience = 30;
  AdamOptions adam;
  std::uint64_t seed = 0;
  bool record_wall_time = true;  // false writes 0 for reproducible logs
  // Called once per finished epoch, in order.
  std::function<void(const EpochRecord&)> on_epoch;
  // Diagnostics hook: may replace the measured validation loss of an epoch.
  std::function<double(std::size_t epoch, double val_loss)> val_loss_override;
};

struct TrainResult {
  ModelState best;  // parameters of the epoch with the lowest validation loss
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
  std::vector<EpochRecord> log;
};

// Minibatch Adam training with a per-epoch seeded shuffle of the training
// split, a validation pass after every epoch and early stopping. The model
// ends up holding the best state. Throws DataError on an empty train or
// validation split and NumericalError when a loss turns non-finite.
TrainResult train(SedModel& model, const SequenceDataset& data, const TrainOptions& opts);

// Mean loss over a split in inference mode; restores the previous mode.
double evaluate_loss(SedModel& model, const SequenceDataset& data, Split split,
                     std::size_t batch_size = 16);

// Inference-mode predictions (T x C) for the given items, in order.
std::vector<Tensor> predict(SedModel& model, const SequenceDataset& data,
                            std::span<const std::size_t> indices, std::size_t batch_size = 16);

}  // namespace dlc
