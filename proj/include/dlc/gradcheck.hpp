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
#include <string>
#include <vector>

#include "dlc/layers.hpp"
#include "dlc/model.hpp"

namespace dlc {

struct GradCheckOptions {
  double step = 1e-5;       // central difference half-width
  double tolerance = 1e-4;  // max relative error
  double abs_floor = 1e-6;  // denominator floor of the relative error
  // Upper bound on checked entries per tensor; 0 checks all of them. When
  // bounded, entries are taken at an even stride.
  std::size_t max_entries = 0;
};

// |a - n| / max(|a|, |n|, floor)
double relative_error(double analytic, double numeric, double floor);

// A differentiable map under test. forward must be a pure function of the
// input and the current parameter values (reseed any randomness inside it);
// backward receives d loss / d output, returns d loss / d input and
// accumulates parameter gradients.
struct Differentiable {
  std::function<Tensor(const Tensor&)> forward;
  std::function<Tensor(const Tensor&)> backward;
  NamedParams params;
  // Optional: branch state after the latest forward. Entries whose +/- step
  // changes it straddle a kink; they are skipped, not scored.
  std::function<std::vector<std::size_t>()> branch_state;
};

// Scalar objective of the output and its gradient. Default: sum(out * R)
// with a fixed random R.
using Objective = std::function<std::pair<double, Tensor>(const Tensor& out)>;

struct GradCheckResult {
  std::string subject;
  std::string tensor;  // "input" or a parameter name
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  bool passed = true;
};

// Checks d objective / d input and every parameter gradient.
std::vector<GradCheckResult> finite_difference_check(const std::string& subject,
                                                     Differentiable f, Tensor input,
                                                     std::uint64_t seed,
                                                     const GradCheckOptions& opts = {},
                                                     Objective objective = {});

// Convenience wrapper for a Layer; `before_forward` runs before every
// forward evaluation (e.g. to reseed dropout).
std::vector<GradCheckResult> check_layer(const std::string& subject, Layer& layer,
                                         const Tensor& input, std::uint64_t seed,
                                         const GradCheckOptions& opts = {},
                                         std::function<void()> before_forward = {});

struct GradSuiteOptions {
  std::vector<std::string> subjects;  // empty runs all
  std::size_t seeds = 20;
  std::size_t steps = 12;        // T of the head and model instances
  std::size_t feature_width = 6; // W_f of the head instances
  std::size_t classes = 3;
  std::size_t kernel_h = 3;
  std::size_t dilation = 2;
  GradCheckOptions check;
};

struct GradSuiteEntry {
  std::string subject;
  std::size_t runs = 0;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  double max_rel_error = 0.0;
  bool passed = true;
  std::string worst;  // tensor with the largest error
};

// Known subjects, in suite order.
const std::vector<std::string>& gradient_subjects();

// Runs every selected subject over `seeds` random instances. Throws
// ConfigError on an unknown subject name.
std::vector<GradSuiteEntry> run_gradient_suite(const GradSuiteOptions& opts);

}  // namespace dlc
