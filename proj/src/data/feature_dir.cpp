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
#include <fstream>

#include "json.hpp"

#include "dlc/data.hpp"
#include "dlc/errors.hpp"
#include "dlc/serialize.hpp"

namespace dlc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFormat = "dlc-features/1";

void check_id(const std::string& id) {
  if (id.empty() || id.find_first_of("/\\") != std::string::npos || id == "." || id == "..") {
    throw DataError("feature dir: invalid item id '" + id + "'");
  }
}

}  // namespace

void save_feature_dir(const SequenceDataset& data, const fs::path& dir) {
  data.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir.string() + ": " + ec.message());

  std::vector<const SequenceItem*> order;
  for (const auto& item : data.items) order.push_back(&item);
  std::sort(order.begin(), order.end(),
            [](const SequenceItem* a, const SequenceItem* b) { return a->id < b->id; });

  json manifest;
  manifest["format"] = kFormat;
  manifest["steps"] = data.steps;
  manifest["features"] = data.features;
  manifest["classes"] = data.classes;
  manifest["class_names"] = data.class_names;
  manifest["items"] = json::array();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& item = *order[i];
    check_id(item.id);
    if (i > 0 && order[i - 1]->id == item.id) {
      throw DataError("feature dir: duplicate item id '" + item.id + "'");
    }
    manifest["items"].push_back(
        {{"id", item.id}, {"split", split_name(item.split)}, {"valid", item.valid}});
    save_tensor(dir / (item.id + ".features.dlc"), item.features);
    save_tensor(dir / (item.id + ".labels.dlc"), item.labels);
  }
  if (data.norm) {
    manifest["norm"] = {{"mean", "norm.mean.dlc"}, {"std", "norm.std.dlc"}};
    save_tensor(dir / "norm.mean.dlc", data.norm->mean);
    save_tensor(dir / "norm.std.dlc", data.norm->std);
  }
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
}

SequenceDataset load_feature_dir(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw DataError("feature dir: missing manifest " + path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("feature dir: corrupt manifest " + path.string() + ": " + e.what());
  }
  SequenceDataset data;
  try {
    if (manifest.value("format", std::string{}) != kFormat) {
      throw DataError("feature dir: unsupported manifest format in " + path.string());
    }
    data.steps = manifest.at("steps").get<std::size_t>();
    data.features = manifest.at("features").get<std::size_t>();
    data.classes = manifest.at("classes").get<std::size_t>();
    data.class_names = manifest.at("class_names").get<std::vector<std::string>>();
    for (const auto& entry : manifest.at("items")) {
      SequenceItem item;
      item.id = entry.at("id").get<std::string>();
      check_id(item.id);
      item.split = parse_split(entry.at("split").get<std::string>());
      item.valid = entry.value("valid", data.steps);
      item.features = load_tensor(dir / (item.id + ".features.dlc"));
      item.labels = load_tensor(dir / (item.id + ".labels.dlc"));
      data.items.push_back(std::move(item));
    }
    if (manifest.contains("norm")) {
      const auto& n = manifest.at("norm");
      data.norm = NormStats{load_tensor(dir / n.at("mean").get<std::string>()),
                            load_tensor(dir / n.at("std").get<std::string>())};
    }
  } catch (const json::exception& e) {
    throw DataError("feature dir: corrupt manifest " + path.string() + ": " + e.what());
  }
  std::sort(data.items.begin(), data.items.end(),
            [](const SequenceItem& a, const SequenceItem& b) { return a.id < b.id; });
  data.validate();
  return data;
}

}  // namespace dlc
