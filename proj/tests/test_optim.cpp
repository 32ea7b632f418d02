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

#include "doctest.h"
#include "oracles.hpp"

#include "dlc/errors.hpp"
#include "dlc/optim.hpp"

using namespace dlc;

namespace {

ModelConfig tiny_model(std::size_t features, std::size_t classes) {
  ModelConfig cfg;
  cfg.channels = {6, 6};
  cfg.dw_kernel_h = 3;
  cfg.dw_kernel_w = 3;
  cfg.pool_widths = {4, 2};
  cfg.num_features = features;
  cfg.num_classes = classes;
  cfg.temporal_channels = 4;
  cfg.kernel_h = 3;
  cfg.kernel_w = 3;
  cfg.dilation = 2;
  return cfg;
}

SequenceDataset tiny_data(std::uint64_t seed, std::size_t steps = 32) {
  SynthConfig s;
  s.features = 16;
  s.steps = steps;
  s.train = 8;
  s.val = 2;
  s.test = 0;
  s.dependencies = {{0, 1, 6}};
  return synth_generate(s, seed);
}

// Central differences of a loss with respect to each prediction.
template <class Loss>
double max_fd_error(Loss loss, Tensor pred, const Tensor& labels,
                    std::span<const std::size_t> valid) {
  const Tensor g = loss(pred, labels, valid).grad;
  double worst = 0.0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double saved = pred[i];
    pred[i] = saved + h;
    const double up = loss(pred, labels, valid).value;
    pred[i] = saved - h;
    const double down = loss(pred, labels, valid).value;
    pred[i] = saved;
    const double n = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(n - g[i]) / std::max({std::abs(n), std::abs(g[i]), 1e-6}));
  }
  return worst;
}

}  // namespace

TEST_CASE("binary cross-entropy") {
  std::mt19937_64 rng(1);
  const Tensor y = oracle::random_binary({2, 5, 3}, rng);
  CHECK(bce_loss(y, y).value <= 1e-6);
  CHECK(bce_loss(Tensor({2, 5, 3}, 0.5), y).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK_THROWS_AS(bce_loss(Tensor({1, 1, 1}, 0.5), Tensor({1, 1, 1}, 0.5)), DataError);
  CHECK_THROWS_AS(bce_loss(Tensor({1, 2, 1}), Tensor({1, 1, 1})), DimensionError);

  for (int trial = 0; trial < 20; ++trial) {
    const Tensor p = oracle::random_tensor({2, 4, 3}, rng, 0.02, 0.98);
    const Tensor lab = oracle::random_binary({2, 4, 3}, rng, 0.5);
    const std::vector<std::size_t> valid{4, 2};
    CHECK(max_fd_error(bce_loss, p, lab, valid) <= 1e-6);
  }
}

TEST_CASE("masked frames do not contribute to the loss") {
  std::mt19937_64 rng(2);
  Tensor p = oracle::random_tensor({1, 6, 2}, rng, 0.1, 0.9);
  const Tensor y = oracle::random_binary({1, 6, 2}, rng);
  const std::vector<std::size_t> valid{4};
  const LossResult a = bce_loss(p, y, valid);
  for (std::size_t i = 8; i < 12; ++i) p[i] = 0.5;
  CHECK(bce_loss(p, y, valid).value == a.value);
  for (std::size_t i = 8; i < 12; ++i) CHECK(a.grad[i] == 0.0);
  // mean over the 8 counted elements
  Tensor head({1, 4, 2});
  Tensor yhead({1, 4, 2});
  std::copy(p.data(), p.data() + 8, head.data());
  std::copy(y.data(), y.data() + 8, yhead.data());
  CHECK(bce_loss(head, yhead).value == doctest::Approx(a.value).epsilon(1e-14));
}

TEST_CASE("clamped predictions have a zero loss gradient") {
  const Tensor p({1, 1, 2}, {0.0, 1.0});
  const Tensor y({1, 1, 2}, {1.0, 0.0});
  const LossResult r = bce_loss(p, y);
  CHECK(r.value == doctest::Approx(-std::log(1e-7)).epsilon(1e-9));
  CHECK(r.grad[0] == 0.0);
  CHECK(r.grad[1] == 0.0);
}

TEST_CASE("categorical cross-entropy") {
  CHECK(categorical_ce_loss(Tensor({1, 3, 16}, 1.0 / 16), [] {
          Tensor y({1, 3, 16});
          for (std::size_t t = 0; t < 3; ++t) y[t * 16 + t] = 1.0;
          return y;
        }()).value == doctest::Approx(std::log(16.0)).epsilon(1e-12));
  Tensor onehot({1, 2, 4});
  onehot[1] = 1.0;
  onehot[4 + 3] = 1.0;
  CHECK(categorical_ce_loss(onehot, onehot).value <= 1e-6);

  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor p = oracle::random_tensor({2, 3, 4}, rng, 0.05, 0.95);
    Tensor y({2, 3, 4});
    std::uniform_int_distribution<std::size_t> cls(0, 3);
    for (std::size_t f = 0; f < 6; ++f) y[f * 4 + cls(rng)] = 1.0;
    CHECK(max_fd_error(categorical_ce_loss, p, y, {}) <= 1e-6);
  }
}

TEST_CASE("adam matches the scalar recurrence") {
  Tensor x({1}, {1.0}), m({1}), v({1});
  adam_update(x, Tensor({1}, {1.0}), m, v, 1, {});
  CHECK(std::abs(x[0] - 0.999) <= 1e-6);

  std::mt19937_64 rng(4);
  Param p(oracle::random_tensor({3}, rng));
  NamedParams params{{"p", &p}};
  Adam adam;
  std::vector<oracle::ScalarAdam> ref(3);
  std::vector<double> want(p.value.values().begin(), p.value.values().end());
  double worst = 0.0;
  for (int step = 0; step < 100; ++step) {
    p.grad = oracle::random_tensor({3}, rng, -2.0, 2.0);
    adam.step(params);
    for (std::size_t i = 0; i < 3; ++i) {
      want[i] = ref[i].step(want[i], p.grad[i]);
      worst = std::max(worst, std::abs(want[i] - p.value[i]));
    }
  }
  CHECK(worst <= 1e-12);
  CHECK(adam.steps() == 100);
}

TEST_CASE("adam identities") {
  std::mt19937_64 rng(5);
  Param p(oracle::random_tensor({4}, rng));
  const Tensor start = p.value;
  NamedParams params{{"p", &p}};
  Adam still;
  for (int i = 0; i < 10; ++i) still.step(params);
  CHECK(p.value == start);
  for (double v : still.first_moments()[0].values()) CHECK(v == 0.0);
  for (double v : still.second_moments()[0].values()) CHECK(v == 0.0);

  AdamOptions zero_lr;
  zero_lr.lr = 0.0;
  Adam frozen(zero_lr);
  for (int i = 0; i < 10; ++i) {
    p.grad = oracle::random_tensor({4}, rng);
    frozen.step(params);
  }
  CHECK(p.value == start);
}

TEST_CASE("early stopper") {
  EarlyStopper s(2);
  CHECK(s.update(1.0));
  CHECK(s.update(0.9));
  CHECK_FALSE(s.update(0.95));
  CHECK_FALSE(s.should_stop());
  CHECK_FALSE(s.update(0.96));
  CHECK(s.should_stop());
  CHECK(s.best_epoch() == 2);
  CHECK(s.best_loss() == 0.9);
  EarlyStopper equal(1);
  equal.update(1.0);
  CHECK_FALSE(equal.update(1.0));  // ties are not improvements
}

TEST_CASE("training stops on patience and returns the best epoch") {
  const SequenceDataset data = tiny_data(1);
  SedModel model(tiny_model(16, 4), 0);
  TrainOptions opts;
  opts.patience = 2;
  opts.max_epochs = 50;
  opts.record_wall_time = false;
  const double forced[] = {1.0, 0.9, 0.95, 0.96};
  opts.val_loss_override = [&](std::size_t epoch, double) { return forced[epoch - 1]; };
  std::vector<ModelState> states;
  opts.on_epoch = [&](const EpochRecord&) { states.push_back(model.state()); };
  const TrainResult r = train(model, data, opts);
  CHECK(r.log.size() == 4);
  CHECK(r.early_stopped);
  CHECK(r.best_epoch == 2);
  CHECK(r.best_val_loss == 0.9);
  CHECK(model.state().tensors == states[1].tensors);
  CHECK(r.best.tensors == states[1].tensors);
}

TEST_CASE("training loss decreases on a tiny synthetic set") {
  const SequenceDataset data = tiny_data(2, 64);  // 8 sequences, T = 64, C = 4
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    SedModel model(tiny_model(16, 4), seed);
    TrainOptions opts;
    opts.max_epochs = 10;
    opts.batch_size = 4;
    opts.adam.lr = 3e-3;
    opts.seed = seed;
    const TrainResult r = train(model, data, opts);
    REQUIRE(r.log.size() == 10);
    for (std::size_t e = 1; e < 10; ++e) {
      INFO("seed " << seed << " epoch " << e + 1);
      CHECK(r.log[e].train_loss < r.log[e - 1].train_loss);
    }
    for (const auto& rec : r.log) CHECK(r.best_val_loss <= rec.val_loss);
  }
}

TEST_CASE("training with zero learning rate leaves parameters unchanged") {
  const SequenceDataset data = tiny_data(3);
  SedModel model(tiny_model(16, 4), 4);
  std::vector<Tensor> before;
  for (const auto& [name, p] : model.params()) before.push_back(p->value);
  TrainOptions opts;
  opts.max_epochs = 3;
  opts.adam.lr = 0.0;
  train(model, data, opts);
  std::size_t k = 0;
  for (const auto& [name, p] : model.params()) CHECK(p->value == before[k++]);
}

TEST_CASE("training is deterministic") {
  const SequenceDataset data = tiny_data(4);
  auto run = [&] {
    SedModel model(tiny_model(16, 4), 9);
    TrainOptions opts;
    opts.max_epochs = 4;
    opts.seed = 9;
    opts.record_wall_time = false;
    std::string log;
    for (const auto& rec : train(model, data, opts).log) log += to_ndjson(rec) + "\n";
    return std::pair{log, model.state().tensors};
  };
  const auto a = run();
  const auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.find("\"wall_time\":0.0") != std::string::npos);
}

TEST_CASE("training errors") {
  SequenceDataset data = tiny_data(5);
  SedModel wrong(tiny_model(16, 3), 0);
  CHECK_THROWS_AS(train(wrong, data, {}), DataError);

  SedModel model(tiny_model(16, 4), 0);
  SequenceDataset no_val = data;
  std::erase_if(no_val.items, [](const SequenceItem& i) { return i.split == Split::kVal; });
  CHECK_THROWS_AS(train(model, no_val, {}), DataError);

  model.params().front().second->value[0] = std::nan("");
  TrainOptions opts;
  opts.max_epochs = 1;
  CHECK_THROWS_AS(train(model, data, opts), NumericalError);
}

TEST_CASE("epoch records serialize as one JSON line") {
  EpochRecord r{3, 0.5, 0.25, 0.0, 7};
  CHECK(to_ndjson(r) ==
        R"({"epoch":3,"train_loss":0.5,"val_loss":0.25,"wall_time":0.0,"seed":7})");
}
