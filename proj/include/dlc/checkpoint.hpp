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
#include <filesystem>
#include <map>
#include <string>

#include "dlc/model.hpp"

namespace dlc {

// File layout (little-endian):
//   "DLCK"  u32 manifest byte length  manifest JSON
//   one DLC1 tensor per manifest "tensors" entry, in manifest order
//
// The manifest holds the model configuration, tensor names and shapes, and
// free-form string metadata (seed, best epoch, ...).
inline constexpr char kCheckpointMagic[4] = {'D', 'L', 'C', 'K'};

struct Checkpoint {
  ModelState state;
  std::map<std::string, std::string> metadata;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws DataError naming the path when the file is missing or corrupt.
Checkpoint load_checkpoint(const std::filesystem::path& path);

// ModelConfig <-> JSON text (one object, keys as in the config file).
std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(const std::string& text);

}  // namespace dlc
