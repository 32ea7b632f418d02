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
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dlc/tensor.hpp"

namespace dlc {

struct FrameCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t n_ref = 0;  // active reference (frame, class) pairs
  std::uint64_t s = 0;
  std::uint64_t d = 0;
  std::uint64_t i = 0;

  FrameCounts& operator+=(const FrameCounts& other);
  bool operator==(const FrameCounts&) const = default;
};

// Binarizes predictions (T x C) with p >= threshold and tallies against
// binary labels (T x C). Frames at or beyond `valid` are skipped.
FrameCounts frame_counts(const Tensor& pred, const Tensor& labels, double threshold = 0.5,
                         std::size_t valid = static_cast<std::size_t>(-1));

// 2TP / (2TP + FP + FN), with 0/0 = 0.
double f1_score(const FrameCounts& counts);
// (S + D + I) / N_ref; throws NumericalError when N_ref == 0.
double error_rate(const FrameCounts& counts);

struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // population
};

struct RunScore {
  double f1 = 0.0;
  double er = 0.0;
};

struct EvalReport {
  double threshold = 0.5;
  FrameCounts counts;  // pooled over runs
  double f1 = 0.0;     // of the pooled counts
  double er = 0.0;
  std::vector<RunScore> per_run;
  Aggregate f1_agg;
  Aggregate er_agg;
};

// Scores of a single run over several sequences.
EvalReport frame_scores(std::span<const Tensor> preds, std::span<const Tensor> labels,
                        std::span<const std::size_t> valid, double threshold = 0.5);

// Mean and population std of values; throws DataError on an empty list.
Aggregate aggregate(std::span<const double> values);
// Pools run reports: per_run lists every run, f1_agg/er_agg summarize them.
EvalReport aggregate_runs(std::span<const EvalReport> reports);

// One line per table row: method,f1_avg,f1_std,f1_delta,er_avg,er_std,er_delta.
// Deltas are relative to the first row.
struct TableRow {
  std::string method;
  Aggregate f1;
  Aggregate er;
};
void write_metrics_csv(std::ostream& os, std::span<const TableRow> rows);

// Single-line JSON record of a report.
std::string report_json(const EvalReport& report);

}  // namespace dlc
