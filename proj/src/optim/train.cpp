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
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "json.hpp"

#include "dlc/errors.hpp"
#include "dlc/optim.hpp"

namespace dlc {

std::string to_ndjson(const EpochRecord& record) {
  nlohmann::ordered_json j;
  j["epoch"] = record.epoch;
  j["train_loss"] = record.train_loss;
  j["val_loss"] = record.val_loss;
  j["wall_time"] = record.wall_time;
  j["seed"] = record.seed;
  return j.dump();
}

namespace {

class ModeGuard {
 public:
  ModeGuard(SedModel& model, Mode mode) : model_(model), saved_(model.mode()) {
    model_.set_mode(mode);
  }
  ~ModeGuard() { model_.set_mode(saved_); }
  ModeGuard(const ModeGuard&) = delete;
  ModeGuard& operator=(const ModeGuard&) = delete;

 private:
  SedModel& model_;
  Mode saved_;
};

std::vector<std::size_t> require_split(const SequenceDataset& data, Split split) {
  auto idx = data.indices(split);
  if (idx.empty()) {
    throw DataError("training: the " + std::string(split_name(split)) + " split is empty");
  }
  return idx;
}

void check_compatible(const SedModel& model, const SequenceDataset& data) {
  const auto& cfg = model.config();
  if (cfg.num_features != data.features || cfg.num_classes != data.classes) {
    throw DataError("model expects F=" + std::to_string(cfg.num_features) +
                    ", C=" + std::to_string(cfg.num_classes) + " but the dataset has F=" +
                    std::to_string(data.features) + ", C=" + std::to_string(data.classes));
  }
}

}  // namespace

double evaluate_loss(SedModel& model, const SequenceDataset& data, Split split,
                     std::size_t batch_size) {
  check_compatible(model, data);
  const auto idx = require_split(data, split);
  ModeGuard guard(model, Mode::kInfer);
  double total = 0.0;
  for (std::size_t begin = 0; begin < idx.size(); begin += batch_size) {
    const std::size_t end = std::min(idx.size(), begin + batch_size);
    const Batch b = make_batch(data, std::span(idx).subspan(begin, end - begin));
    const Tensor pred = model.forward(b.features);
    total += loss_for(model.config().activation, pred, b.labels, b.valid).value *
             static_cast<double>(end - begin);
  }
  return total / static_cast<double>(idx.size());
}

std::vector<Tensor> predict(SedModel& model, const SequenceDataset& data,
                            std::span<const std::size_t> indices, std::size_t batch_size) {
  check_compatible(model, data);
  ModeGuard guard(model, Mode::kInfer);
  std::vector<Tensor> out;
  out.reserve(indices.size());
  const std::size_t t = data.steps;
  const std::size_t c = data.classes;
  for (std::size_t begin = 0; begin < indices.size(); begin += batch_size) {
    const std::size_t end = std::min(indices.size(), begin + batch_size);
    const Batch b = make_batch(data, indices.subspan(begin, end - begin));
    const Tensor pred = model.forward(b.features);
    for (std::size_t k = 0; k < end - begin; ++k) {
      Tensor y({t, c});
      std::copy(pred.data() + k * t * c, pred.data() + (k + 1) * t * c, y.data());
      out.push_back(std::move(y));
    }
  }
  return out;
}

TrainResult train(SedModel& model, const SequenceDataset& data, const TrainOptions& opts) {
  check_compatible(model, data);
  if (opts.batch_size == 0) throw ConfigError("train.batch_size: must be positive");
  if (opts.max_epochs == 0) throw ConfigError("train.epochs: must be positive");
  std::vector<std::size_t> order = require_split(data, Split::kTrain);
  require_split(data, Split::kVal);

  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 shuffle_rng(opts.seed);
  Adam adam(opts.adam);
  EarlyStopper stopper(opts.patience);
  TrainResult result;
  const NamedParams params = model.params();
  const Activation act = model.config().activation;

  for (std::size_t epoch = 1; epoch <= opts.max_epochs; ++epoch) {
    model.set_mode(Mode::kTrain);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += opts.batch_size) {
      const std::size_t end = std::min(order.size(), begin + opts.batch_size);
      const Batch b = make_batch(data, std::span(order).subspan(begin, end - begin));
      zero_grads(params);
      const Tensor pred = model.forward(b.features, &b.labels);
      const LossResult loss = loss_for(act, pred, b.labels, b.valid);
      if (!std::isfinite(loss.value)) {
        throw NumericalError("training: non-finite loss at epoch " + std::to_string(epoch) +
                             ", batch starting at position " + std::to_string(begin) +
                             " (seed " + std::to_string(opts.seed) + ")");
      }
      model.backward(loss.grad);
      adam.step(params);
      total += loss.value * static_cast<double>(end - begin);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.seed = opts.seed;
    rec.train_loss = total / static_cast<double>(order.size());
    rec.val_loss = evaluate_loss(model, data, Split::kVal, opts.batch_size);
    if (opts.val_loss_override) rec.val_loss = opts.val_loss_override(epoch, rec.val_loss);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericalError("training: non-finite validation loss at epoch " +
                           std::to_string(epoch));
    }
    if (opts.record_wall_time) {
      rec.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    result.log.push_back(rec);
    if (opts.on_epoch) opts.on_epoch(rec);

    if (stopper.update(rec.val_loss)) result.best = model.state();
    if (stopper.should_stop()) {
      result.early_stopped = true;
      break;
    }
  }
  result.best_epoch = stopper.best_epoch();
  result.best_val_loss = stopper.best_loss();
  model.load_state(result.best);
  model.set_mode(Mode::kInfer);
  return result;
}

}  // namespace dlc
