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

#include "dlc/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "dlc/errors.hpp"
#include "dlc/serialize.hpp"

namespace dlc {

using nlohmann::ordered_json;

namespace {

ordered_json config_json(const ModelConfig& cfg) {
  ordered_json j;
  j["channels"] = cfg.channels;
  j["dw_kernel_h"] = cfg.dw_kernel_h;
  j["dw_kernel_w"] = cfg.dw_kernel_w;
  j["pools"] = cfg.pool_widths;
  j["dropout"] = cfg.dropout;
  j["lrelu_slope"] = cfg.lrelu_slope;
  j["bn_momentum"] = cfg.bn_momentum;
  j["bn_epsilon"] = cfg.bn_epsilon;
  j["kernel_h"] = cfg.kernel_h;
  j["kernel_w"] = cfg.kernel_w;
  j["temporal_channels"] = cfg.temporal_channels;
  j["dilation"] = cfg.dilation;
  j["features"] = cfg.num_features;
  j["classes"] = cfg.num_classes;
  j["conditioning"] = cfg.conditioning;
  j["teacher_forcing"] = cfg.teacher_forcing;
  j["detach_conditioning"] = cfg.detach_conditioning;
  j["activation"] = cfg.activation == Activation::kSoftmax ? "softmax" : "sigmoid";
  return j;
}

ModelConfig config_from(const ordered_json& j) {
  ModelConfig cfg;
  cfg.channels = j.at("channels").get<std::vector<std::size_t>>();
  cfg.dw_kernel_h = j.at("dw_kernel_h").get<std::size_t>();
  cfg.dw_kernel_w = j.at("dw_kernel_w").get<std::size_t>();
  cfg.pool_widths = j.at("pools").get<std::vector<std::size_t>>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.lrelu_slope = j.at("lrelu_slope").get<double>();
  cfg.bn_momentum = j.at("bn_momentum").get<double>();
  cfg.bn_epsilon = j.at("bn_epsilon").get<double>();
  cfg.kernel_h = j.at("kernel_h").get<std::size_t>();
  cfg.kernel_w = j.at("kernel_w").get<std::size_t>();
  cfg.temporal_channels = j.at("temporal_channels").get<std::size_t>();
  cfg.dilation = j.at("dilation").get<std::size_t>();
  cfg.num_features = j.at("features").get<std::size_t>();
  cfg.num_classes = j.at("classes").get<std::size_t>();
  cfg.conditioning = j.at("conditioning").get<bool>();
  cfg.teacher_forcing = j.at("teacher_forcing").get<bool>();
  cfg.detach_conditioning = j.at("detach_conditioning").get<bool>();
  const auto act = j.at("activation").get<std::string>();
  if (act != "sigmoid" && act != "softmax") {
    throw DataError("checkpoint: unknown activation '" + act + "'");
  }
  cfg.activation = act == "softmax" ? Activation::kSoftmax : Activation::kSigmoid;
  return cfg;
}

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}

}  // namespace

std::string config_to_json(const ModelConfig& cfg) { return config_json(cfg).dump(); }

ModelConfig config_from_json(const std::string& text) {
  try {
    return config_from(ordered_json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model configuration: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  ordered_json manifest;
  manifest["format"] = "dlc-checkpoint/1";
  manifest["config"] = config_json(ckpt.state.config);
  manifest["tensors"] = ordered_json::array();
  for (const auto& [name, t] : ckpt.state.tensors) {
    manifest["tensors"].push_back({{"name", name}, {"shape", t.shape()}});
  }
  manifest["metadata"] = ckpt.metadata;
  const std::string text = manifest.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot open checkpoint " + path.string() + " for writing");
  os.write(kCheckpointMagic, 4);
  put_u32(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& [name, t] : ckpt.state.tensors) write_tensor(os, t);
  if (!os) throw DataError("writing checkpoint " + path.string() + " failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  const auto fail = [&](const std::string& why) {
    return DataError("checkpoint " + path.string() + ": " + why);
  };
  char magic[4];
  unsigned char len[4];
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(len), 4);
  if (!is || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw fail("bad magic, expected DLCK");
  const std::uint32_t size = len[0] | (len[1] << 8) | (len[2] << 16) |
                             (static_cast<std::uint32_t>(len[3]) << 24);
  std::string text(size, '\0');
  is.read(text.data(), size);
  if (!is) throw fail("truncated manifest");
  Checkpoint ckpt;
  try {
    const auto manifest = ordered_json::parse(text);
    if (manifest.at("format").get<std::string>() != "dlc-checkpoint/1") {
      throw fail("unsupported format");
    }
    ckpt.state.config = config_from(manifest.at("config"));
    ckpt.metadata = manifest.at("metadata").get<std::map<std::string, std::string>>();
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<Shape>();
      Tensor t = read_tensor(is);
      if (t.shape() != shape) throw fail("tensor '" + name + "' disagrees with its manifest shape");
      ckpt.state.tensors.emplace_back(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("corrupt manifest: ") + e.what());
  } catch (const DataError& e) {
    const std::string what = e.what();
    if (what.starts_with("checkpoint ")) throw;
    throw fail(what);
  }
  return ckpt;
}

}  // namespace dlc
