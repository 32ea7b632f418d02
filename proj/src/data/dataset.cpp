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
#include <cstdio>

#include "dlc/data.hpp"
#include "dlc/errors.hpp"

namespace dlc {

std::string_view split_name(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
  }
  return "train";
}

Split parse_split(std::string_view name) {
  if (name == "train") return Split::kTrain;
  if (name == "val" || name == "validation") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw DataError("unknown split '" + std::string(name) + "'");
}

std::vector<std::size_t> SequenceDataset::indices(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].split == split) out.push_back(i);
  }
  return out;
}

void SequenceDataset::validate() const {
  if (class_names.size() != classes) {
    throw DataError("dataset: " + std::to_string(class_names.size()) + " class names for " +
                    std::to_string(classes) + " classes");
  }
  for (const auto& item : items) {
    if (item.features.shape() != Shape{steps, features}) {
      throw DataError("dataset item '" + item.id + "': features have shape " +
                      shape_str(item.features.shape()) + ", expected " +
                      shape_str({steps, features}));
    }
    if (item.labels.shape() != Shape{steps, classes}) {
      throw DataError("dataset item '" + item.id + "': labels have shape " +
                      shape_str(item.labels.shape()) + ", expected " +
                      shape_str({steps, classes}) + " (class count " +
                      std::to_string(classes) + ")");
    }
    for (double v : item.labels.values()) {
      if (v != 0.0 && v != 1.0) {
        throw DataError("dataset item '" + item.id + "': label values must be 0 or 1");
      }
    }
    if (item.valid > steps) {
      throw DataError("dataset item '" + item.id + "': valid frame count exceeds T");
    }
    if (!item.features.all_finite()) {
      throw DataError("dataset item '" + item.id + "': non-finite feature values");
    }
  }
  if (norm) {
    if (norm->mean.shape() != Shape{features} || norm->std.shape() != Shape{features}) {
      throw DataError("dataset: normalization statistics do not match F");
    }
  }
}

Batch make_batch(const SequenceDataset& data, std::span<const std::size_t> indices) {
  if (indices.empty()) throw DataError("batch: no sequences selected");
  const std::size_t n = indices.size();
  const std::size_t t = data.steps;
  Batch b{Tensor({n, t, data.features}), Tensor({n, t, data.classes}), {}};
  b.valid.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& item = data.items.at(indices[k]);
    std::copy(item.features.data(), item.features.data() + item.features.size(),
              b.features.data() + k * t * data.features);
    std::copy(item.labels.data(), item.labels.data() + item.labels.size(),
              b.labels.data() + k * t * data.classes);
    b.valid.push_back(item.valid);
  }
  return b;
}

namespace {

struct Accumulator {
  explicit Accumulator(std::size_t f) : sum(f, 0.0), sq(f, 0.0) {}
  void add_rows(const Tensor& m, std::size_t rows) {
    const std::size_t f = sum.size();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < f; ++j) sum[j] += m[r * f + j];
    }
    count += rows;
    rows_.emplace_back(&m, rows);
  }
  NormStats finish(double floor) {
    if (count == 0) throw DataError("normalization: no frames to compute statistics from");
    const std::size_t f = sum.size();
    NormStats st{Tensor({f}), Tensor({f})};
    for (std::size_t j = 0; j < f; ++j) st.mean[j] = sum[j] / static_cast<double>(count);
    // second pass keeps the variance accurate for large offsets
    for (const auto& [m, rows] : rows_) {
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < f; ++j) {
          const double d = (*m)[r * f + j] - st.mean[j];
          sq[j] += d * d;
        }
      }
    }
    for (std::size_t j = 0; j < f; ++j) {
      st.std[j] = std::max(std::sqrt(sq[j] / static_cast<double>(count)), floor);
    }
    return st;
  }

  std::vector<double> sum;
  std::vector<double> sq;
  std::size_t count = 0;
  std::vector<std::pair<const Tensor*, std::size_t>> rows_;
};

}  // namespace

NormStats compute_norm_stats(const SequenceDataset& data, double std_floor) {
  Accumulator acc(data.features);
  for (const auto& item : data.items) {
    if (item.split == Split::kTrain) acc.add_rows(item.features, item.valid);
  }
  return acc.finish(std_floor);
}

NormStats compute_norm_stats(std::span<const Tensor> matrices, double std_floor) {
  if (matrices.empty()) throw DataError("normalization: no frames to compute statistics from");
  const std::size_t f = matrices.front().dim(1);
  Accumulator acc(f);
  for (const auto& m : matrices) {
    if (m.rank() != 2 || m.dim(1) != f) {
      throw DimensionError("normalization: feature matrices disagree on F");
    }
    acc.add_rows(m, m.dim(0));
  }
  return acc.finish(std_floor);
}

namespace {

void normalize_rows(double* rows, std::size_t count, const NormStats& st) {
  const std::size_t f = st.mean.size();
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t j = 0; j < f; ++j) {
      rows[r * f + j] = (rows[r * f + j] - st.mean[j]) / st.std[j];
    }
  }
}

}  // namespace

void apply_norm(SequenceDataset& data, const NormStats& stats) {
  if (stats.mean.size() != data.features) {
    throw DimensionError("normalization: statistics cover " +
                         std::to_string(stats.mean.size()) + " bands, data has " +
                         std::to_string(data.features));
  }
  for (auto& item : data.items) normalize_rows(item.features.data(), item.valid, stats);
  data.norm = stats;
}

std::vector<SequenceItem> chunk_and_normalize(const Tensor& features, const Tensor& labels,
                                              const NormStats& stats, std::size_t steps,
                                              const std::string& id_prefix, Split split) {
  if (features.rank() != 2 || labels.rank() != 2 || features.dim(0) != labels.dim(0)) {
    throw DimensionError("chunking: features " + shape_str(features.shape()) +
                         " and labels " + shape_str(labels.shape()) + " disagree");
  }
  if (steps == 0) throw ConfigError("chunking: T must be positive");
  const std::size_t frames = features.dim(0);
  const std::size_t f = features.dim(1);
  const std::size_t c = labels.dim(1);
  if (stats.mean.size() != f || stats.std.size() != f) {
    throw DimensionError("chunking: statistics do not match F=" + std::to_string(f));
  }
  std::vector<SequenceItem> out;
  const std::size_t chunks = (frames + steps - 1) / steps;
  for (std::size_t k = 0; k < chunks; ++k) {
    const std::size_t begin = k * steps;
    const std::size_t valid = std::min(steps, frames - begin);
    SequenceItem item;
    char suffix[32];
    std::snprintf(suffix, sizeof suffix, "_%04zu", k);
    item.id = id_prefix + suffix;
    item.split = split;
    item.features = Tensor({steps, f});
    item.labels = Tensor({steps, c});
    item.valid = valid;
    std::copy(features.data() + begin * f, features.data() + (begin + valid) * f,
              item.features.data());
    std::copy(labels.data() + begin * c, labels.data() + (begin + valid) * c,
              item.labels.data());
    normalize_rows(item.features.data(), valid, stats);
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace dlc
