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

#include "dlc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dlc/errors.hpp"
#include "dlc/optim.hpp"

namespace dlc {

double relative_error(double analytic, double numeric, double floor) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / scale;
}

namespace {

std::vector<std::size_t> entries(std::size_t size, std::size_t max_entries) {
  std::vector<std::size_t> idx;
  if (max_entries == 0 || size <= max_entries) {
    idx.resize(size);
    for (std::size_t i = 0; i < size; ++i) idx[i] = i;
    return idx;
  }
  for (std::size_t k = 0; k < max_entries; ++k) idx.push_back(k * size / max_entries);
  return idx;
}

using BranchFn = std::function<std::vector<std::size_t>()>;

GradCheckResult compare(const std::string& subject, const std::string& name, Tensor& x,
                        const Tensor& analytic, const std::function<double()>& loss,
                        const BranchFn& branches, const std::vector<std::size_t>& base,
                        const GradCheckOptions& opts) {
  GradCheckResult r{subject, name, 0, 0, 0.0, true};
  for (std::size_t i : entries(x.size(), opts.max_entries)) {
    const double saved = x[i];
    x[i] = saved + opts.step;
    const double up = loss();
    const bool up_kink = branches && branches() != base;
    x[i] = saved - opts.step;
    const double down = loss();
    const bool down_kink = branches && branches() != base;
    x[i] = saved;
    if (up_kink || down_kink) {
      ++r.skipped;
      continue;
    }
    const double numeric = (up - down) / (2.0 * opts.step);
    const double err = relative_error(analytic[i], numeric, opts.abs_floor);
    r.max_rel_error = std::max(r.max_rel_error, err);
    ++r.checked;
  }
  r.passed = r.max_rel_error <= opts.tolerance;
  return r;
}

}  // namespace

std::vector<GradCheckResult> finite_difference_check(const std::string& subject,
                                                     Differentiable f, Tensor input,
                                                     std::uint64_t seed,
                                                     const GradCheckOptions& opts,
                                                     Objective objective) {
  if (!objective) {
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    const Tensor probe = f.forward(input);
    const Tensor r = random_uniform(probe.shape(), -1.0, 1.0, rng);
    objective = [r](const Tensor& out) { return std::pair{dot(out, r), r}; };
  }
  zero_grads(f.params);
  const auto [value, upstream] = objective(f.forward(input));
  const Tensor grad_input = f.backward(upstream);
  std::vector<Tensor> grads;
  for (const auto& [name, p] : f.params) grads.push_back(p->grad);

  std::vector<std::size_t> base;
  if (f.branch_state) {
    f.forward(input);
    base = f.branch_state();
  }
  std::vector<GradCheckResult> results;
  const auto loss_at = [&](const Tensor& x) { return objective(f.forward(x)).first; };
  results.push_back(compare(subject, "input", input, grad_input,
                            [&] { return loss_at(input); }, f.branch_state, base, opts));
  for (std::size_t k = 0; k < f.params.size(); ++k) {
    Param& p = *f.params[k].second;
    results.push_back(compare(subject, f.params[k].first, p.value, grads[k],
                              [&] { return loss_at(input); }, f.branch_state, base, opts));
  }
  return results;
}

std::vector<GradCheckResult> check_layer(const std::string& subject, Layer& layer,
                                         const Tensor& input, std::uint64_t seed,
                                         const GradCheckOptions& opts,
                                         std::function<void()> before_forward) {
  Differentiable f;
  f.forward = [&layer, before_forward](const Tensor& x) {
    if (before_forward) before_forward();
    return layer.forward(x);
  };
  f.backward = [&layer](const Tensor& g) { return layer.backward(g); };
  f.branch_state = [&layer] {
    std::vector<std::size_t> s;
    layer.branch_state(s);
    return s;
  };
  layer.collect_params("", f.params);
  return finite_difference_check(subject, std::move(f), input, seed, opts);
}

// --- Suite -----------------------------------------------------------------

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

void randomize(const NamedParams& params, Rng& rng, double scale = 0.5) {
  for (const auto& [name, p] : params) p->value = random_uniform(p->value.shape(), -scale, scale, rng);
}

// Uniform values with |x| >= 0.1 so that a step never crosses a kink.
Tensor away_from_zero(const Shape& shape, Rng& rng) {
  Tensor t = random_uniform(shape, 0.1, 1.0, rng);
  std::bernoulli_distribution sign(0.5);
  for (double& v : t.values()) v = sign(rng) ? v : -v;
  return t;
}

// Distinct values spaced 0.05 apart in random order: no near-ties in a pool
// window.
Tensor well_separated(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  std::vector<double> v(t.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i);
  std::shuffle(v.begin(), v.end(), rng);
  for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i] - 0.025 * static_cast<double>(v.size());
  return t;
}

Differentiable head_subject(TemporalHead& head, const Tensor* labels) {
  Differentiable f;
  f.forward = [&head, labels](const Tensor& x) { return head.forward(x, labels); };
  f.backward = [&head](const Tensor& g) { return head.backward(g); };
  head.collect_params("", f.params);
  return f;
}

Tensor random_labels(const Shape& shape, Rng& rng) {
  Tensor y(shape);
  std::bernoulli_distribution on(0.4);
  for (double& v : y.values()) v = on(rng) ? 1.0 : 0.0;
  return y;
}

std::vector<GradCheckResult> run_subject(const std::string& subject, const GradSuiteOptions& o,
                                         std::uint64_t seed) {
  Rng rng(seed * 1000003u + 17u);
  const auto& opts = o.check;
  if (subject == "depthwise") {
    const std::size_t c = pick(rng, 1, 3), kh = pick(rng, 1, 3), kw = pick(rng, 1, 3);
    Padding pad{pick(rng, 0, 2), pick(rng, 0, 2), pick(rng, 0, 2), pick(rng, 0, 2)};
    DepthwiseConv2d layer(c, kh, kw, pad);
    NamedParams ps;
    layer.collect_params("", ps);
    randomize(ps, rng);
    const Tensor x = random_uniform({2, c, pick(rng, kh, 6), pick(rng, kw, 6)}, -1.0, 1.0, rng);
    return check_layer(subject, layer, x, seed, opts);
  }
  if (subject == "pointwise") {
    const std::size_t ci = pick(rng, 1, 4), co = pick(rng, 1, 4);
    PointwiseConv2d layer(ci, co);
    NamedParams ps;
    layer.collect_params("", ps);
    randomize(ps, rng);
    const Tensor x = random_uniform({2, ci, pick(rng, 1, 5), pick(rng, 1, 5)}, -1.0, 1.0, rng);
    return check_layer(subject, layer, x, seed, opts);
  }
  if (subject == "lrelu") {
    LeakyRelu layer(std::uniform_real_distribution<double>(0.0, 0.5)(rng));
    return check_layer(subject, layer, away_from_zero({2, 2, 3, 4}, rng), seed, opts);
  }
  if (subject == "batchnorm") {
    const std::size_t c = pick(rng, 1, 3);
    BatchNorm2d layer(c);
    NamedParams ps;
    layer.collect_params("", ps);
    randomize(ps, rng, 1.0);
    const bool infer = seed % 2 == 1;
    if (infer) {
      layer.running_mean() = random_uniform({c}, -0.5, 0.5, rng);
      layer.running_var() = random_uniform({c}, 0.5, 1.5, rng);
      layer.set_mode(Mode::kInfer);
    }
    const Tensor x = random_uniform({2, c, pick(rng, 1, 4), pick(rng, 2, 4)}, -1.0, 1.0, rng);
    return check_layer(subject, layer, x, seed, opts);
  }
  if (subject == "maxpool") {
    const std::size_t k = pick(rng, 1, 4);
    MaxPoolWidth layer(k);
    return check_layer(subject, layer, well_separated({2, 2, 3, k * pick(rng, 1, 3)}, rng), seed,
                       opts);
  }
  if (subject == "dropout") {
    Dropout layer(0.25, seed);
    const Tensor x = random_uniform({2, 2, 3, 4}, -1.0, 1.0, rng);
    return check_layer(subject, layer, x, seed, opts, [&layer, seed] { layer.reseed(seed); });
  }
  if (subject == "classifier") {
    const std::size_t d = pick(rng, 1, 5), c = pick(rng, 1, 4);
    Classifier layer(d, c, seed % 2 == 0 ? Activation::kSigmoid : Activation::kSoftmax);
    NamedParams ps;
    layer.collect_params("", ps);
    randomize(ps, rng);
    return check_layer(subject, layer, random_uniform({pick(rng, 1, 5), d}, -1.0, 1.0, rng),
                       seed, opts);
  }
  const Shape hidden{2, o.steps, o.feature_width};
  if (subject == "dcnn") {
    const auto pad = seed % 2 == 0 ? TimePadding::kSymmetric : TimePadding::kCausal;
    DilatedConvHead head(o.feature_width, o.classes, 2, o.kernel_h, 3, o.dilation,
                         Activation::kSigmoid, pad);
    auto f = head_subject(head, nullptr);
    randomize(f.params, rng);
    return finite_difference_check(subject, std::move(f), random_uniform(hidden, -1, 1, rng),
                                   seed, opts);
  }
  if (subject == "cdcnn") {
    // plain, teacher-forced and softmax variants; a detached chain is a
    // stop-gradient by construction and has no finite-difference counterpart
    const std::size_t variant = seed % 3;
    ConditionedDilatedConvHead head(o.feature_width, o.classes, 2, o.kernel_h, 3, o.dilation,
                                    variant == 2 ? Activation::kSoftmax : Activation::kSigmoid,
                                    variant == 1);
    const Tensor labels = random_labels({2, o.steps, o.classes}, rng);
    auto f = head_subject(head, variant == 1 ? &labels : nullptr);
    randomize(f.params, rng);
    return finite_difference_check(subject, std::move(f), random_uniform(hidden, -1, 1, rng),
                                   seed, opts);
  }
  if (subject == "model") {
    ModelConfig cfg;
    cfg.channels = {2, 3};
    cfg.pool_widths = {2, 3};
    cfg.dw_kernel_h = 3;
    cfg.dw_kernel_w = 3;
    cfg.num_features = 12;
    cfg.num_classes = o.classes;
    cfg.temporal_channels = 2;
    cfg.kernel_h = o.kernel_h;
    cfg.dilation = o.dilation;
    cfg.conditioning = true;
    SedModel model(cfg, seed);
    Differentiable f;
    f.forward = [&model, seed](const Tensor& x) {
      model.reseed_dropout(seed);
      return model.forward(x);
    };
    f.backward = [&model](const Tensor& g) { return model.backward(g); };
    f.branch_state = [&model] { return model.branch_state(); };
    f.params = model.params();
    // weights at least 0.2 of their init bound away from zero: a
    // single-channel conv followed by BN is scale-invariant and sharply
    // curved near w = 0
    for (const auto& [name, p] : f.params) {
      if (name.ends_with("gamma") || name.ends_with("beta")) continue;
      double bound = 0.0;
      for (double v : p->value.values()) bound = std::max(bound, std::abs(v));
      const Tensor magnitude = away_from_zero(p->value.shape(), rng);
      for (std::size_t i = 0; i < magnitude.size(); ++i) {
        p->value[i] = std::copysign(bound * (0.1 + 0.9 * std::abs(magnitude[i])), magnitude[i]);
      }
    }
    const Tensor labels = random_labels({2, o.steps, cfg.num_classes}, rng);
    Objective bce = [labels](const Tensor& out) {
      auto r = bce_loss(out, labels);
      return std::pair{r.value, std::move(r.grad)};
    };
    return finite_difference_check(subject, std::move(f),
                                   random_uniform({2, o.steps, cfg.num_features}, -1, 1, rng),
                                   seed, opts, bce);
  }
  throw ConfigError("gradcheck: unknown subject '" + subject + "'");
}

}  // namespace

const std::vector<std::string>& gradient_subjects() {
  static const std::vector<std::string> names{"depthwise", "pointwise", "lrelu",
                                              "batchnorm", "maxpool",   "dropout",
                                              "classifier", "dcnn",     "cdcnn",
                                              "model"};
  return names;
}

std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteOptions& opts) {
  const auto& known = gradient_subjects();
  std::vector<std::string> selected = opts.subjects.empty() ? known : opts.subjects;
  for (const auto& s : selected) {
    if (std::find(known.begin(), known.end(), s) == known.end()) {
      throw ConfigError("gradcheck: unknown subject '" + s + "'");
    }
  }
  std::vector<GradSuiteEntry> out;
  for (const auto& subject : selected) {
    GradSuiteEntry e;
    e.subject = subject;
    for (std::size_t s = 0; s < opts.seeds; ++s) {
      for (const auto& r : run_subject(subject, opts, s)) {
        e.checked += r.checked;
        e.skipped += r.skipped;
        if (r.max_rel_error >= e.max_rel_error) {
          e.max_rel_error = r.max_rel_error;
          e.worst = r.tensor;
        }
        e.passed = e.passed && r.passed;
      }
      ++e.runs;
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace dlc
