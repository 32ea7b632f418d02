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

#include <filesystem>

#include "doctest.h"
#include "oracles.hpp"

#include "dlc/checkpoint.hpp"
#include "dlc/errors.hpp"
#include "dlc/gradcheck.hpp"
#include "dlc/model.hpp"

using namespace dlc;

namespace {

ModelConfig small_config() {
  ModelConfig cfg;
  cfg.channels = {3, 4};
  cfg.dw_kernel_h = 3;
  cfg.dw_kernel_w = 3;
  cfg.pool_widths = {2, 2};
  cfg.num_features = 8;
  cfg.num_classes = 3;
  cfg.temporal_channels = 2;
  cfg.kernel_h = 3;
  cfg.kernel_w = 3;
  cfg.dilation = 2;
  return cfg;
}

void randomize(ConditionedDilatedConvHead& head, std::mt19937_64& rng) {
  NamedParams ps;
  head.collect_params("", ps);
  for (auto& [name, p] : ps) p->value = oracle::random_tensor(p->value.shape(), rng);
}

// Row t of an N=1 prediction tensor.
std::vector<double> row(const Tensor& y, std::size_t t) {
  const std::size_t c = y.dim(2);
  return {y.data() + t * c, y.data() + (t + 1) * c};
}

}  // namespace

TEST_CASE("feature extractor shape law") {
  ModelConfig cfg;
  cfg.channels = {5};
  cfg.pool_widths = {2};
  cfg.num_features = 8;
  FeatureExtractor ex(cfg, 1);
  const Tensor h = ex.forward(Tensor({2, 8, 8}, 0.3));
  CHECK(h.shape() == Shape{2, 8, 5 * 4});
  CHECK(cfg.feature_width() == 20);
}

TEST_CASE("published extractor configuration keeps T rows") {
  ModelConfig cfg;  // 3 blocks, 5x5 kernels, pools 5/4/2, F = 40
  cfg.channels = {8, 8, 8};
  FeatureExtractor ex(cfg, 2);
  ex.set_mode(Mode::kInfer);
  std::mt19937_64 rng(3);
  const Tensor h = ex.forward(oracle::random_tensor({1, 1024, 40}, rng));
  CHECK(h.shape() == Shape{1, 1024, 8});
}

TEST_CASE("zero input gives zero hidden features in inference") {
  ModelConfig cfg = small_config();
  FeatureExtractor ex(cfg, 4);
  ex.set_mode(Mode::kInfer);
  for (double v : oracle::values_of(ex.forward(Tensor({1, 6, 8})))) CHECK(v == 0.0);
}

TEST_CASE("config invariants") {
  ModelConfig cfg = small_config();
  cfg.pool_widths = {3, 2};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.dilation = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.kernel_h = 4;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(DilatedConvHead(4, 2, 2, 4, 3, 1, Activation::kSigmoid), ConfigError);
}

TEST_CASE("dcnn keeps the time resolution") {
  std::mt19937_64 rng(5);
  for (std::size_t k : {3u, 5u, 7u}) {
    for (std::size_t xi : {1u, 10u, 50u, 100u}) {
      DilatedConvHead head(4, 3, 2, k, k, xi, Activation::kSigmoid);
      const Tensor y = head.forward(oracle::random_tensor({1, 1024, 4}, rng), nullptr);
      CHECK(y.shape() == Shape{1, 1024, 3});
      ConditionedDilatedConvHead ch(4, 3, 2, k, k, xi, Activation::kSigmoid);
      CHECK(ch.forward(oracle::random_tensor({1, 1024, 4}, rng), nullptr).shape() ==
            Shape{1, 1024, 3});
    }
  }
  DilatedConvHead head(4, 3, 2, 3, 3, 10, Activation::kSigmoid);
  CHECK(head.padding().top == 10);
  CHECK(head.padding().bottom == 10);
}

TEST_CASE("dcnn with zero weights is uniform under softmax") {
  DilatedConvHead head(4, 5, 2, 3, 3, 2, Activation::kSoftmax);
  std::mt19937_64 rng(6);
  for (double v : oracle::values_of(head.forward(oracle::random_tensor({2, 9, 4}, rng), nullptr))) {
    CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
  }
}

TEST_CASE("dcnn receptive field spans 601 rows for K=7 and dilation 100") {
  std::mt19937_64 rng(7);
  DilatedConvHead head(2, 2, 1, 7, 1, 100, Activation::kSigmoid);
  head.kernel().value = oracle::random_tensor(head.kernel().value.shape(), rng, 0.5, 1.0);
  head.classifier().weight().value = oracle::random_tensor({2, 2}, rng, 0.5, 1.0);
  const Tensor x = oracle::random_tensor({1, 1024, 2}, rng);
  const Tensor base = head.forward(x, nullptr);
  const std::size_t probe = 500;
  std::vector<std::size_t> hit;
  std::vector<std::size_t> first;
  for (std::size_t r = 0; r < 1024; ++r) {
    Tensor p = x;
    p[r * 2] += 1.0;
    const Tensor y = head.forward(p, nullptr);
    if (row(y, probe) != row(base, probe)) hit.push_back(r);
    if (row(y, 0) != row(base, 0)) first.push_back(r);
  }
  REQUIRE(hit.size() == 7);
  CHECK(hit.front() == probe - 300);
  CHECK(hit.back() - hit.front() + 1 == 601);
  for (std::size_t k = 0; k < 7; ++k) CHECK(hit[k] == probe - 300 + 100 * k);
  // the first step sees the upper half of its window inside the sequence
  CHECK(first == std::vector<std::size_t>{0, 100, 200, 300});
}

TEST_CASE("cdcnn window indices for K=3 and dilation 2") {
  std::mt19937_64 rng(8);
  ConditionedDilatedConvHead head(3, 2, 2, 3, 3, 2, Activation::kSigmoid);
  randomize(head, rng);
  const Tensor x = oracle::random_tensor({1, 6, 3}, rng);
  const Tensor base = head.forward(x, nullptr);
  // Step t reads rows {t-4, t-2, t} of H' and of Q, and Q[r] depends on
  // H' only through steps of the same parity. Row 1 thus reaches steps
  // 1, 3, 5 and never steps 0, 2, 4.
  Tensor p = x;
  for (std::size_t j = 0; j < 3; ++j) p[1 * 3 + j] += 0.5;
  const Tensor y = head.forward(p, nullptr);
  for (std::size_t t : {0u, 2u, 4u}) CHECK(row(y, t) == row(base, t));
  for (std::size_t t : {1u, 3u, 5u}) CHECK(row(y, t) != row(base, t));
}

TEST_CASE("cdcnn is causal") {
  std::mt19937_64 rng(9);
  ConditionedDilatedConvHead head(4, 3, 2, 3, 3, 2, Activation::kSigmoid);
  randomize(head, rng);
  const Tensor x = oracle::random_tensor({1, 16, 4}, rng);
  const Tensor base = head.forward(x, nullptr);
  std::uniform_int_distribution<std::size_t> pick(0, 14);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t t = pick(rng);
    Tensor p = x;
    for (std::size_t r = t + 1; r < 16; ++r) {
      for (std::size_t j = 0; j < 4; ++j) p[r * 4 + j] = oracle::random_tensor({1}, rng, -9, 9)[0];
    }
    const Tensor y = head.forward(p, nullptr);
    for (std::size_t s = 0; s <= t; ++s) CHECK(row(y, s) == row(base, s));
  }
}

TEST_CASE("cdcnn with zero embedding equals the two-channel causal dcnn") {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    ConditionedDilatedConvHead ch(5, 3, 2, 3, 3, 2, Activation::kSigmoid);
    randomize(ch, rng);
    ch.aff_weight().value.fill(0.0);
    ch.aff_bias().value.fill(0.0);
    DilatedConvHead dh(5, 3, 2, 3, 3, 2, Activation::kSigmoid, TimePadding::kCausal, 2);
    dh.kernel().value = ch.kernel().value;
    dh.classifier().weight().value = ch.cls_weight().value;
    dh.classifier().bias().value = ch.cls_bias().value;

    const Tensor x = oracle::random_tensor({2, 12, 5}, rng);
    const Tensor yc = ch.forward(x, nullptr);
    const Tensor yd = dh.forward(x, nullptr);
    CHECK(max_abs_diff(yc, yd) <= 1e-12);
    for (double v : ch.conditioning().values()) CHECK(v == 0.0);

    const Tensor g = oracle::random_tensor(yc.shape(), rng);
    const Tensor gxc = ch.backward(g);
    const Tensor gxd = dh.backward(g);
    CHECK(max_abs_diff(gxc, gxd) <= 1e-10);
    CHECK(max_abs_diff(ch.kernel().grad, dh.kernel().grad) <= 1e-10);
    CHECK(max_abs_diff(ch.cls_weight().grad, dh.classifier().weight().grad) <= 1e-10);
  }
}

TEST_CASE("cdcnn zero upstream gives zero gradients") {
  std::mt19937_64 rng(11);
  ConditionedDilatedConvHead head(4, 3, 2, 3, 3, 2, Activation::kSigmoid);
  randomize(head, rng);
  const Tensor y = head.forward(oracle::random_tensor({1, 8, 4}, rng), nullptr);
  for (double v : oracle::values_of(head.backward(Tensor::zeros_like(y)))) CHECK(v == 0.0);
  NamedParams ps;
  head.collect_params("", ps);
  for (auto& [name, p] : ps) {
    for (double v : p->grad.values()) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(head.backward(Tensor::zeros_like(y)), StateError);
}

TEST_CASE("detached conditioning matches teacher forcing on the model's own predictions") {
  std::mt19937_64 rng(12);
  ConditionedDilatedConvHead free_run(4, 3, 2, 3, 3, 2, Activation::kSigmoid, false, true);
  randomize(free_run, rng);
  const Tensor x = oracle::random_tensor({2, 10, 4}, rng);
  const Tensor y = free_run.forward(x, nullptr);
  ConditionedDilatedConvHead forced(4, 3, 2, 3, 3, 2, Activation::kSigmoid, true, false);
  NamedParams a, b;
  free_run.collect_params("", a);
  forced.collect_params("", b);
  for (std::size_t k = 0; k < a.size(); ++k) b[k].second->value = a[k].second->value;
  CHECK(forced.forward(x, &y) == y);

  const Tensor g = oracle::random_tensor(y.shape(), rng);
  CHECK(max_abs_diff(free_run.backward(g), forced.backward(g)) <= 1e-15);
  for (std::size_t k = 0; k < a.size(); ++k) {
    INFO(a[k].first);
    CHECK(max_abs_diff(a[k].second->grad, b[k].second->grad) <= 1e-15);
  }
}

TEST_CASE("teacher forcing only consults labels in training mode") {
  ModelConfig cfg = small_config();
  cfg.teacher_forcing = true;
  SedModel model(cfg, 3);
  std::mt19937_64 rng(13);
  const Tensor x = oracle::random_tensor({1, 10, 8}, rng);
  const Tensor y1 = oracle::random_binary({1, 10, 3}, rng);
  const Tensor y2 = oracle::random_binary({1, 10, 3}, rng);
  model.set_mode(Mode::kInfer);
  CHECK(model.forward(x, &y1) == model.forward(x, &y2));
  CHECK(model.forward(x, &y1) == model.forward(x));
}

TEST_CASE("unit dilation keeps conditioning as a plain causal convolution") {
  std::mt19937_64 rng(14);
  ConditionedDilatedConvHead head(3, 2, 2, 3, 3, 1, Activation::kSigmoid);
  randomize(head, rng);
  const Tensor x = oracle::random_tensor({1, 8, 3}, rng);
  const Tensor base = head.forward(x, nullptr);
  CHECK(max_abs_diff(head.conditioning(), Tensor({1, 8, 3})) > 0.0);
  // row 2 reaches step 2 directly and every later step through Q
  Tensor p = x;
  p[2 * 3] += 1.0;
  const Tensor y = head.forward(p, nullptr);
  for (std::size_t t = 0; t < 2; ++t) CHECK(row(y, t) == row(base, t));
  for (std::size_t t = 2; t < 8; ++t) CHECK(row(y, t) != row(base, t));
}

TEST_CASE("model forward and gradients are deterministic") {
  ModelConfig cfg = small_config();
  std::mt19937_64 rng(15);
  const Tensor x = oracle::random_tensor({2, 10, 8}, rng);
  const Tensor g = oracle::random_tensor({2, 10, 3}, rng);
  auto run = [&] {
    SedModel m(cfg, 21);
    m.reseed_dropout(5);
    const Tensor y = m.forward(x);
    const Tensor gx = m.backward(g);
    std::vector<Tensor> out{y, gx};
    for (const auto& [name, p] : m.params()) out.push_back(p->grad);
    return out;
  };
  CHECK(run() == run());
}

TEST_CASE("conditioned heads and the full micro-model pass finite-difference checks") {
  GradSuiteOptions opts;
  opts.subjects = {"dcnn", "cdcnn", "model"};
  for (const auto& entry : run_gradient_suite(opts)) {
    INFO(entry.subject << " worst " << entry.worst << " " << entry.max_rel_error);
    CHECK(entry.passed);
    CHECK(entry.checked > 0);
  }
}

TEST_CASE("parameter counts") {
  const DwsComparison c = compare_dws(5, 5, 100, 100);
  CHECK(c.standard == 250000);
  CHECK(c.separable == 12500);
  CHECK(c.ratio == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(c.matches_factor());
  const DwsComparison d = compare_dws(1, 1, 7, 1);
  CHECK(d.ratio == 2.0);
  CHECK(d.matches_factor());

  std::mt19937_64 rng(16);
  std::uniform_int_distribution<std::size_t> k(1, 9), ch(1, 512);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t kh = k(rng), kw = k(rng), cin = ch(rng), cout = ch(rng);
    const DwsComparison r = compare_dws(kh, kw, cin, cout);
    CHECK(r.matches_factor());
    CHECK(r.separable * cout * kh * kw == r.standard * (kh * kw + cout));
  }

  ModelConfig cfg;  // published shape
  const ParamCount a = param_count(cfg);
  CHECK(a.total == param_count(cfg).total);
  SedModel model([] {
    ModelConfig m;
    m.channels = {4, 6, 5};
    return m;
  }(), 0);
  std::size_t counted = 0;
  for (const auto& [name, p] : model.params()) counted += p->value.size();
  CHECK(param_count(model.config()).total == counted);
}

TEST_CASE("checkpoint round trip") {
  ModelConfig cfg = small_config();
  SedModel a(cfg, 7);
  Checkpoint ck{a.state(), {{"seed", "7"}}};
  const auto path = std::filesystem::temp_directory_path() / "dlc_test_ckpt.dlck";
  save_checkpoint(path, ck);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.state.config == cfg);
  CHECK(back.metadata.at("seed") == "7");
  SedModel b(cfg, 99);
  b.load_state(back.state);
  CHECK(b.state().tensors == a.state().tensors);

  ModelConfig other = cfg;
  other.dilation = 3;
  SedModel c(other, 1);
  CHECK_THROWS_AS(c.load_state(back.state), DataError);
  CHECK_THROWS_AS(load_checkpoint(path.string() + ".missing"), DataError);
  CHECK(config_from_json(config_to_json(cfg)) == cfg);
  std::filesystem::remove(path);
}
