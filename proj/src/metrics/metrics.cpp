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

#include "dlc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "json.hpp"

#include "dlc/errors.hpp"

namespace dlc {

FrameCounts& FrameCounts::operator+=(const FrameCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
  n_ref += o.n_ref;
  s += o.s;
  d += o.d;
  i += o.i;
  return *this;
}

FrameCounts frame_counts(const Tensor& pred, const Tensor& labels, double threshold,
                         std::size_t valid) {
  if (pred.rank() != 2 || pred.shape() != labels.shape()) {
    throw DimensionError("metrics: predictions " + shape_str(pred.shape()) + " and labels " +
                         shape_str(labels.shape()) + " must be equal T x C");
  }
  const std::size_t frames = std::min(valid, pred.dim(0));
  const std::size_t classes = pred.dim(1);
  FrameCounts k;
  for (std::size_t t = 0; t < frames; ++t) {
    std::uint64_t fn = 0, fp = 0;
    for (std::size_t c = 0; c < classes; ++c) {
      const double y = labels[t * classes + c];
      if (y != 0.0 && y != 1.0) throw DataError("metrics: label values must be 0 or 1");
      const bool ref = y == 1.0;
      const bool sys = pred[t * classes + c] >= threshold;
      k.tp += ref && sys;
      fp += !ref && sys;
      fn += ref && !sys;
      k.n_ref += ref;
    }
    k.fp += fp;
    k.fn += fn;
    k.s += std::min(fn, fp);
    k.d += fn > fp ? fn - fp : 0;
    k.i += fp > fn ? fp - fn : 0;
  }
  return k;
}

double f1_score(const FrameCounts& k) {
  const std::uint64_t denom = 2 * k.tp + k.fp + k.fn;
  return denom == 0 ? 0.0 : static_cast<double>(2 * k.tp) / static_cast<double>(denom);
}

double error_rate(const FrameCounts& k) {
  if (k.n_ref == 0) {
    throw NumericalError("metrics: error rate undefined without active reference frames");
  }
  return static_cast<double>(k.s + k.d + k.i) / static_cast<double>(k.n_ref);
}

EvalReport frame_scores(std::span<const Tensor> preds, std::span<const Tensor> labels,
                        std::span<const std::size_t> valid, double threshold) {
  if (preds.size() != labels.size() || (!valid.empty() && valid.size() != preds.size())) {
    throw DimensionError("metrics: prediction, label and valid lists differ in length");
  }
  EvalReport r;
  r.threshold = threshold;
  for (std::size_t k = 0; k < preds.size(); ++k) {
    r.counts += frame_counts(preds[k], labels[k], threshold,
                             valid.empty() ? static_cast<std::size_t>(-1) : valid[k]);
  }
  r.f1 = f1_score(r.counts);
  r.er = error_rate(r.counts);
  r.per_run = {{r.f1, r.er}};
  r.f1_agg = {r.f1, 0.0};
  r.er_agg = {r.er, 0.0};
  return r;
}

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) throw DataError("aggregate: no runs to aggregate");
  const double n = static_cast<double>(values.size());
  Aggregate a;
  for (double v : values) a.mean += v;
  a.mean /= n;
  double sq = 0.0;
  for (double v : values) sq += (v - a.mean) * (v - a.mean);
  a.std = std::sqrt(sq / n);
  return a;
}

EvalReport aggregate_runs(std::span<const EvalReport> reports) {
  if (reports.empty()) throw DataError("aggregate: no runs to aggregate");
  EvalReport r;
  r.threshold = reports.front().threshold;
  std::vector<double> f1, er;
  for (const auto& rep : reports) {
    r.counts += rep.counts;
    for (const auto& run : rep.per_run) {
      r.per_run.push_back(run);
      f1.push_back(run.f1);
      er.push_back(run.er);
    }
  }
  r.f1 = f1_score(r.counts);
  r.er = error_rate(r.counts);
  r.f1_agg = aggregate(f1);
  r.er_agg = aggregate(er);
  return r;
}

void write_metrics_csv(std::ostream& os, std::span<const TableRow> rows) {
  os << "method,f1_avg,f1_std,f1_delta,er_avg,er_std,er_delta\n";
  if (rows.empty()) return;
  const auto& base = rows.front();
  const auto flags = os.flags();
  const auto precision = os.precision();
  os << std::fixed << std::setprecision(4);
  for (const auto& row : rows) {
    std::string method = row.method;
    if (method.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : method) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      method = quoted + "\"";
    }
    os << method << ',' << row.f1.mean << ',' << row.f1.std << ','
       << row.f1.mean - base.f1.mean << ',' << row.er.mean << ',' << row.er.std << ','
       << row.er.mean - base.er.mean << '\n';
  }
  os.flags(flags);
  os.precision(precision);
}

std::string report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["threshold"] = r.threshold;
  j["f1"] = r.f1;
  j["er"] = r.er;
  j["counts"] = {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn},
                 {"n_ref", r.counts.n_ref}, {"s", r.counts.s}, {"d", r.counts.d},
                 {"i", r.counts.i}};
  j["per_run"] = nlohmann::ordered_json::array();
  for (const auto& run : r.per_run) j["per_run"].push_back({{"f1", run.f1}, {"er", run.er}});
  j["f1_mean"] = r.f1_agg.mean;
  j["f1_std"] = r.f1_agg.std;
  j["er_mean"] = r.er_agg.mean;
  j["er_std"] = r.er_agg.std;
  return j.dump();
}

}  // namespace dlc
