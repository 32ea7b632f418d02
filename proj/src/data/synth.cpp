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
#include <random>

#include "dlc/data.hpp"
#include "dlc/errors.hpp"

namespace dlc {

void SynthConfig::validate() const {
  if (classes == 0 || features == 0 || steps == 0) {
    throw ConfigError("synth: classes, features and steps must be positive");
  }
  if (train == 0) throw ConfigError("synth.train: at least one training sequence is required");
  if (min_event == 0 || min_event > max_event || max_event > steps) {
    throw ConfigError("synth: need 1 <= min_event <= max_event <= steps");
  }
  if (max_polyphony == 0) throw ConfigError("synth.polyphony: must be positive");
  if (!amplitudes.empty() && amplitudes.size() != classes) {
    throw ConfigError("synth.amplitudes: need one amplitude per class");
  }
  for (double a : amplitudes) {
    if (!(a > 0.0)) throw ConfigError("synth.amplitudes: amplitudes must be positive");
  }
  if (!(background > 0.0) || !(jitter >= 0.0)) {
    throw ConfigError("synth: background must be positive and jitter non-negative");
  }
  std::vector<int> parent(classes, -1);
  for (const auto& d : dependencies) {
    if (d.antecedent >= classes || d.consequent >= classes) {
      throw ConfigError("synth.dependencies: class index out of range");
    }
    if (parent[d.consequent] != -1) {
      throw ConfigError("synth.dependencies: class " + std::to_string(d.consequent) +
                        " follows more than one antecedent");
    }
    parent[d.consequent] = static_cast<int>(d.antecedent);
  }
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t hops = 0;
    for (int p = parent[c]; p != -1; p = parent[static_cast<std::size_t>(p)]) {
      if (static_cast<std::size_t>(p) == c || ++hops > classes) {
        throw ConfigError("synth.dependencies: cycle through class " + std::to_string(c));
      }
    }
  }
}

namespace {

struct Event {
  std::size_t onset;
  std::size_t offset;  // exclusive
};

class SequenceBuilder {
 public:
  SequenceBuilder(const SynthConfig& cfg, std::mt19937_64& rng)
      : cfg_(cfg), rng_(rng), events_(cfg.classes), load_(cfg.steps, 0) {}

  // Same-class events never overlap or touch, so every event is a distinct
  // onset/offset pair in the frame labels.
  bool try_place(std::size_t c, std::size_t onset, std::size_t length) {
    const std::size_t offset = std::min(onset + length, cfg_.steps);
    if (onset >= offset) return false;
    for (const auto& e : events_[c]) {
      if (onset <= e.offset && e.onset <= offset) return false;
    }
    for (std::size_t t = onset; t < offset; ++t) {
      if (load_[t] >= cfg_.max_polyphony) return false;
    }
    for (std::size_t t = onset; t < offset; ++t) ++load_[t];
    events_[c].push_back({onset, offset});
    return true;
  }

  std::size_t draw_length() {
    return std::uniform_int_distribution<std::size_t>(cfg_.min_event, cfg_.max_event)(rng_);
  }

  const std::vector<Event>& events(std::size_t c) const { return events_[c]; }

  Tensor labels() const {
    Tensor y({cfg_.steps, cfg_.classes});
    for (std::size_t c = 0; c < cfg_.classes; ++c) {
      for (const auto& e : events_[c]) {
        for (std::size_t t = e.onset; t < e.offset; ++t) y[t * cfg_.classes + c] = 1.0;
      }
    }
    return y;
  }

 private:
  const SynthConfig& cfg_;
  std::mt19937_64& rng_;
  std::vector<std::vector<Event>> events_;
  std::vector<std::size_t> load_;
};

// Classes ordered so that every antecedent precedes its consequents.
std::vector<std::size_t> placement_order(const SynthConfig& cfg) {
  std::vector<int> parent(cfg.classes, -1);
  for (const auto& d : cfg.dependencies) parent[d.consequent] = static_cast<int>(d.antecedent);
  std::vector<std::pair<std::size_t, std::size_t>> depth;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    std::size_t k = 0;
    for (int p = parent[c]; p != -1; p = parent[static_cast<std::size_t>(p)]) ++k;
    depth.emplace_back(k, c);
  }
  std::sort(depth.begin(), depth.end());
  std::vector<std::size_t> order;
  for (const auto& [k, c] : depth) order.push_back(c);
  return order;
}

Tensor class_templates(const SynthConfig& cfg) {
  Tensor tpl({cfg.classes, cfg.features});
  const double spacing = static_cast<double>(cfg.features) / static_cast<double>(cfg.classes);
  const double width = std::max(0.75, 0.4 * spacing);
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    const double center = (static_cast<double>(c) + 0.5) * spacing;
    const double amp = cfg.amplitudes.empty() ? 1.0 : cfg.amplitudes[c];
    for (std::size_t f = 0; f < cfg.features; ++f) {
      const double z = (static_cast<double>(f) + 0.5 - center) / width;
      tpl[c * cfg.features + f] = amp * std::exp(-0.5 * z * z);
    }
  }
  return tpl;
}

SequenceItem generate_sequence(const SynthConfig& cfg, const Tensor& tpl,
                               const std::vector<std::size_t>& order, std::mt19937_64& rng,
                               std::string id, Split split) {
  SequenceBuilder builder(cfg, rng);
  std::vector<const Dependency*> rule(cfg.classes, nullptr);
  for (const auto& d : cfg.dependencies) rule[d.consequent] = &d;

  for (std::size_t c : order) {
    if (rule[c] == nullptr) {
      for (std::size_t k = 0; k < cfg.events_per_sequence; ++k) {
        const std::size_t len = builder.draw_length();
        const std::size_t onset =
            std::uniform_int_distribution<std::size_t>(0, cfg.steps - len)(rng);
        builder.try_place(c, onset, len);
      }
    } else {
      const Dependency& d = *rule[c];
      const std::vector<Event> anchors = builder.events(d.antecedent);
      for (const auto& a : anchors) {
        const std::size_t gap = std::uniform_int_distribution<std::size_t>(0, d.max_gap)(rng);
        const std::size_t len = builder.draw_length();
        if (a.offset + gap < cfg.steps) builder.try_place(c, a.offset + gap, len);
      }
    }
  }

  SequenceItem item;
  item.id = std::move(id);
  item.split = split;
  item.labels = builder.labels();
  item.valid = cfg.steps;
  item.features = Tensor({cfg.steps, cfg.features});
  std::normal_distribution<double> noise(0.0, cfg.jitter);
  for (std::size_t t = 0; t < cfg.steps; ++t) {
    for (std::size_t f = 0; f < cfg.features; ++f) {
      double e = cfg.background * std::exp(noise(rng));
      for (std::size_t c = 0; c < cfg.classes; ++c) {
        if (item.labels[t * cfg.classes + c] != 0.0) {
          e += tpl[c * cfg.features + f] * std::exp(noise(rng));
        }
      }
      item.features[t * cfg.features + f] = std::log(e);
    }
  }
  return item;
}

}  // namespace

SequenceDataset synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const Tensor tpl = class_templates(cfg);
  const auto order = placement_order(cfg);

  SequenceDataset data;
  data.steps = cfg.steps;
  data.features = cfg.features;
  data.classes = cfg.classes;
  for (std::size_t c = 0; c < cfg.classes; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "class_%02zu", c);
    data.class_names.emplace_back(name);
  }
  const std::pair<Split, std::size_t> plan[] = {
      {Split::kTrain, cfg.train}, {Split::kVal, cfg.val}, {Split::kTest, cfg.test}};
  for (const auto& [split, count] : plan) {
    for (std::size_t i = 0; i < count; ++i) {
      char id[32];
      std::snprintf(id, sizeof id, "%s_%04zu", std::string(split_name(split)).c_str(), i);
      data.items.push_back(generate_sequence(cfg, tpl, order, rng, id, split));
    }
  }
  std::sort(data.items.begin(), data.items.end(),
            [](const SequenceItem& a, const SequenceItem& b) { return a.id < b.id; });
  if (cfg.normalize) apply_norm(data, compute_norm_stats(data));
  data.validate();
  return data;
}

}  // namespace dlc
