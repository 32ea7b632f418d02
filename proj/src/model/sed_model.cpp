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
#include <map>
#include <random>

#include "dlc/errors.hpp"
#include "dlc/model.hpp"

namespace dlc {

namespace {

std::unique_ptr<TemporalHead> make_head(const ModelConfig& cfg) {
  const std::size_t width = cfg.feature_width();
  if (cfg.conditioning) {
    return std::make_unique<ConditionedDilatedConvHead>(
        width, cfg.num_classes, cfg.temporal_channels, cfg.kernel_h, cfg.kernel_w,
        cfg.dilation, cfg.activation, cfg.teacher_forcing, cfg.detach_conditioning);
  }
  return std::make_unique<DilatedConvHead>(width, cfg.num_classes, cfg.temporal_channels,
                                           cfg.kernel_h, cfg.kernel_w, cfg.dilation,
                                           cfg.activation, TimePadding::kSymmetric);
}

const ModelConfig& validated(const ModelConfig& cfg) {
  cfg.validate();
  return cfg;
}

// Fan-in of a parameter given its name and shape.
std::size_t fan_in(const std::string& name, const Shape& shape) {
  if (name.ends_with("depthwise.weight")) return shape[1] * shape[2];
  if (shape.size() == 4) return shape[1] * shape[2] * shape[3];
  if (shape.size() == 2) return shape[1];
  return 0;
}

}  // namespace

SedModel::SedModel(ModelConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)),
      extractor_(validated(cfg_), seed),
      head_(make_head(cfg_)) {
  initialize_parameters(*this, seed);
}

Tensor SedModel::forward(const Tensor& features, const Tensor* labels) {
  if (features.rank() != 3 || features.dim(2) != cfg_.num_features) {
    throw DimensionError("model: expected N x T x " + std::to_string(cfg_.num_features) +
                         " features, got " + shape_str(features.shape()));
  }
  const Tensor hidden = extractor_.forward(features);
  return head_->forward(hidden, mode_ == Mode::kTrain ? labels : nullptr);
}

Tensor SedModel::backward(const Tensor& grad_pred) {
  return extractor_.backward(head_->backward(grad_pred));
}

void SedModel::set_mode(Mode mode) {
  mode_ = mode;
  extractor_.set_mode(mode);
}

NamedParams SedModel::params() {
  NamedParams out;
  extractor_.collect_params("extractor.", out);
  head_->collect_params("head.", out);
  return out;
}

NamedBuffers SedModel::buffers() {
  NamedBuffers out;
  extractor_.collect_buffers("extractor.", out);
  return out;
}

ModelState SedModel::state() {
  ModelState st;
  st.config = cfg_;
  for (const auto& [name, p] : params()) st.tensors.emplace_back(name, p->value);
  for (const auto& [name, t] : buffers()) st.tensors.emplace_back(name, *t);
  return st;
}

void SedModel::load_state(const ModelState& state) {
  if (!(state.config == cfg_)) {
    throw DataError("model: checkpoint configuration differs from the model configuration");
  }
  std::map<std::string, const Tensor*> by_name;
  for (const auto& [name, t] : state.tensors) by_name[name] = &t;
  auto assign = [&](const std::string& name, Tensor& dst) {
    const auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("model: checkpoint lacks tensor '" + name + "'");
    if (it->second->shape() != dst.shape()) {
      throw DataError("model: tensor '" + name + "' has shape " +
                      shape_str(it->second->shape()) + ", expected " +
                      shape_str(dst.shape()));
    }
    dst = *it->second;
  };
  for (const auto& [name, p] : params()) assign(name, p->value);
  for (const auto& [name, t] : buffers()) assign(name, *t);
}

void SedModel::reseed_dropout(std::uint64_t seed) {
  std::size_t l = 0;
  for (auto& block : extractor_.blocks()) block->dropout().reseed(seed * 7919u + 101u * (++l));
}

std::vector<std::size_t> SedModel::branch_state() const {
  std::vector<std::size_t> out;
  extractor_.branch_state(out);
  return out;
}

void initialize_parameters(SedModel& model, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const std::size_t classes = model.config().num_classes;
  for (const auto& [name, p] : model.params()) {
    Tensor& v = p->value;
    if (name.ends_with("gamma")) {
      v.fill(1.0);
    } else if (name.ends_with("beta")) {
      v.fill(0.0);
    } else if (name.ends_with("cls.bias")) {
      const auto inputs = model.config().temporal_channels * model.config().feature_width();
      const double bound = 1.0 / std::sqrt(static_cast<double>(inputs));
      v = random_uniform(v.shape(), -bound, bound, rng);
    } else if (name.ends_with("aff.bias")) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(classes));
      v = random_uniform(v.shape(), -bound, bound, rng);
    } else {
      const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in(name, v.shape())));
      v = random_uniform(v.shape(), -bound, bound, rng);
    }
    p->grad = Tensor::zeros_like(v);
  }
}

// --- Parameter counting ----------------------------------------------------

ParamCount param_count(const ModelConfig& cfg) {
  cfg.validate();
  ParamCount pc;
  std::size_t in_channels = 1;
  for (std::size_t l = 0; l < cfg.blocks(); ++l) {
    const std::string prefix = "block" + std::to_string(l) + ".";
    const std::size_t out_channels = cfg.channels[l];
    pc.components.emplace_back(prefix + "depthwise",
                               in_channels * cfg.dw_kernel_h * cfg.dw_kernel_w);
    pc.components.emplace_back(prefix + "bn_depthwise", 2 * in_channels);
    pc.components.emplace_back(prefix + "pointwise", out_channels * in_channels);
    pc.components.emplace_back(prefix + "bn_pointwise", 2 * out_channels);
    in_channels = out_channels;
  }
  const std::size_t width = cfg.feature_width();
  const std::size_t head_inputs = cfg.conditioning ? 2 : 1;
  pc.components.emplace_back(cfg.conditioning ? "cdcnn.kernel" : "dcnn.kernel",
                             cfg.temporal_channels * head_inputs * cfg.kernel_h *
                                 cfg.kernel_w);
  pc.components.emplace_back("classifier",
                             cfg.temporal_channels * width * cfg.num_classes +
                                 cfg.num_classes);
  if (cfg.conditioning) {
    pc.components.emplace_back("affine", width * cfg.num_classes + width);
  }
  for (const auto& [name, count] : pc.components) pc.total += count;
  return pc;
}

DwsComparison compare_dws(std::size_t kernel_h, std::size_t kernel_w,
                          std::size_t in_channels, std::size_t out_channels) {
  if (kernel_h == 0 || kernel_w == 0 || in_channels == 0 || out_channels == 0) {
    throw ConfigError("paramcount: kernel sizes and channel counts must be positive");
  }
  DwsComparison r;
  const std::size_t area = kernel_h * kernel_w;
  r.standard = out_channels * in_channels * area;
  r.separable = in_channels * area + out_channels * in_channels;
  r.ratio = static_cast<double>(r.separable) / static_cast<double>(r.standard);
  r.factor_numerator = area + out_channels;
  r.factor_denominator = out_channels * area;
  return r;
}

bool DwsComparison::matches_factor() const {
  return separable * factor_denominator == standard * factor_numerator;
}

}  // namespace dlc
