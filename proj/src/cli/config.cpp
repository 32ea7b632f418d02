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
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include "dlc/cli.hpp"
#include "dlc/errors.hpp"

namespace dlc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  if (trim(s).empty()) return out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError(key + ": invalid value '" + value + "' (expected " + expected + ")");
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) {
    bad_value(key, v, "a non-negative integer");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || v.empty()) bad_value(key, v, "a number");
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
  if (v == "off" || v == "false" || v == "no" || v == "0") return false;
  bad_value(key, v, "on or off");
}

std::vector<std::size_t> to_sizes(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  for (const auto& item : split(v, ',')) out.push_back(to_size(key, item));
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& v) {
  std::vector<double> out;
  for (const auto& item : split(v, ',')) out.push_back(to_double(key, item));
  return out;
}

// "0,3,5-9"
std::vector<std::uint64_t> to_seeds(const std::string& key, const std::string& v) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split(v, ',')) {
    const auto dash = item.find('-');
    if (dash == std::string::npos) {
      out.push_back(to_u64(key, item));
      continue;
    }
    const auto lo = to_u64(key, trim(item.substr(0, dash)));
    const auto hi = to_u64(key, trim(item.substr(dash + 1)));
    if (hi < lo) bad_value(key, item, "an ascending range");
    for (auto s = lo; s <= hi; ++s) out.push_back(s);
  }
  if (out.empty()) bad_value(key, v, "at least one seed");
  return out;
}

// "7" or "7x5"
std::pair<std::size_t, std::size_t> to_kernel(const std::string& key, const std::string& v) {
  const auto x = v.find('x');
  if (x == std::string::npos) {
    const auto k = to_size(key, v);
    return {k, k};
  }
  return {to_size(key, trim(v.substr(0, x))), to_size(key, trim(v.substr(x + 1)))};
}

// "0>1:10,2>3:5"
std::vector<Dependency> to_dependencies(const std::string& key, const std::string& v) {
  std::vector<Dependency> out;
  for (const auto& item : split(v, ',')) {
    const auto gt = item.find('>');
    const auto colon = item.find(':');
    if (gt == std::string::npos || colon == std::string::npos || colon < gt) {
      bad_value(key, item, "antecedent>consequent:max_gap");
    }
    out.push_back({to_size(key, trim(item.substr(0, gt))),
                   to_size(key, trim(item.substr(gt + 1, colon - gt - 1))),
                   to_size(key, trim(item.substr(colon + 1)))});
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string fmt(bool v) { return v ? "on" : "off"; }

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, double>) {
      out += fmt(values[i]);
    } else if constexpr (std::is_same_v<T, std::string>) {
      out += values[i];
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

struct KeySpec {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define DLC_SIZE(KEY, FIELD)                                                     \
  KeySpec {                                                                      \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_size(KEY, v); }, \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }              \
  }
#define DLC_DOUBLE(KEY, FIELD)                                                     \
  KeySpec {                                                                        \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(KEY, v); }, \
        [](const RunConfig& c) { return fmt(c.FIELD); }                           \
  }
#define DLC_BOOL(KEY, FIELD)                                                     \
  KeySpec {                                                                      \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(KEY, v); }, \
        [](const RunConfig& c) { return fmt(c.FIELD); }                         \
  }
#define DLC_PATH(KEY, FIELD)                                                        \
  KeySpec {                                                                         \
    KEY, [](RunConfig& c, const std::string& v) { c.FIELD = v; },                   \
        [](const RunConfig& c) { return c.FIELD.string(); }                         \
  }

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs{
      {"model.channels",
       [](RunConfig& c, const std::string& v) { c.model.channels = to_sizes("model.channels", v); },
       [](const RunConfig& c) { return join(c.model.channels); }},
      {"model.dw_kernel",
       [](RunConfig& c, const std::string& v) {
         std::tie(c.model.dw_kernel_h, c.model.dw_kernel_w) = to_kernel("model.dw_kernel", v);
       },
       [](const RunConfig& c) {
         return std::to_string(c.model.dw_kernel_h) + "x" + std::to_string(c.model.dw_kernel_w);
       }},
      {"model.pools",
       [](RunConfig& c, const std::string& v) { c.model.pool_widths = to_sizes("model.pools", v); },
       [](const RunConfig& c) { return join(c.model.pool_widths); }},
      DLC_DOUBLE("model.dropout", model.dropout),
      DLC_DOUBLE("model.lrelu_slope", model.lrelu_slope),
      DLC_DOUBLE("model.bn_momentum", model.bn_momentum),
      DLC_DOUBLE("model.bn_epsilon", model.bn_epsilon),
      {"model.kernel",
       [](RunConfig& c, const std::string& v) {
         std::tie(c.model.kernel_h, c.model.kernel_w) = to_kernel("model.kernel", v);
       },
       [](const RunConfig& c) {
         return std::to_string(c.model.kernel_h) + "x" + std::to_string(c.model.kernel_w);
       }},
      DLC_SIZE("model.temporal_channels", model.temporal_channels),
      DLC_SIZE("model.dilation", model.dilation),
      DLC_SIZE("model.features", model.num_features),
      DLC_SIZE("model.classes", model.num_classes),
      DLC_BOOL("model.conditioning", model.conditioning),
      DLC_BOOL("model.teacher_forcing", model.teacher_forcing),
      DLC_BOOL("model.detach_conditioning", model.detach_conditioning),
      {"model.activation",
       [](RunConfig& c, const std::string& v) {
         if (v == "sigmoid") {
           c.model.activation = Activation::kSigmoid;
         } else if (v == "softmax") {
           c.model.activation = Activation::kSoftmax;
         } else {
           bad_value("model.activation", v, "sigmoid or softmax");
         }
       },
       [](const RunConfig& c) {
         return std::string(c.model.activation == Activation::kSoftmax ? "softmax" : "sigmoid");
       }},
      DLC_SIZE("train.epochs", epochs),
      DLC_SIZE("train.batch_size", batch_size),
      DLC_SIZE("train.patience", patience),
      DLC_DOUBLE("train.lr", adam.lr),
      DLC_DOUBLE("train.beta1", adam.beta1),
      DLC_DOUBLE("train.beta2", adam.beta2),
      DLC_DOUBLE("train.epsilon", adam.epsilon),
      DLC_BOOL("train.wall_time", wall_time),
      {"train.seeds",
       [](RunConfig& c, const std::string& v) { c.seeds = to_seeds("train.seeds", v); },
       [](const RunConfig& c) { return join(c.seeds); }},
      DLC_PATH("data.dir", data_dir),
      DLC_PATH("output.dir", output_dir),
      DLC_DOUBLE("eval.threshold", threshold),
      {"eval.split",
       [](RunConfig& c, const std::string& v) {
         c.eval_split = std::string(split_name(parse_split(v)));
       },
       [](const RunConfig& c) { return c.eval_split; }},
      DLC_PATH("extract.audio_dir", audio_dir),
      DLC_SIZE("extract.steps", steps),
      {"extract.class_names",
       [](RunConfig& c, const std::string& v) { c.class_names = split(v, ','); },
       [](const RunConfig& c) { return join(c.class_names); }},
      DLC_SIZE("synth.classes", synth.classes),
      DLC_SIZE("synth.features", synth.features),
      DLC_SIZE("synth.steps", synth.steps),
      DLC_SIZE("synth.train", synth.train),
      DLC_SIZE("synth.val", synth.val),
      DLC_SIZE("synth.test", synth.test),
      DLC_SIZE("synth.polyphony", synth.max_polyphony),
      DLC_SIZE("synth.min_event", synth.min_event),
      DLC_SIZE("synth.max_event", synth.max_event),
      DLC_SIZE("synth.events", synth.events_per_sequence),
      {"synth.dependencies",
       [](RunConfig& c, const std::string& v) {
         c.synth.dependencies = to_dependencies("synth.dependencies", v);
       },
       [](const RunConfig& c) {
         std::string out;
         for (const auto& d : c.synth.dependencies) {
           if (!out.empty()) out += ',';
           out += std::to_string(d.antecedent) + ">" + std::to_string(d.consequent) + ":" +
                  std::to_string(d.max_gap);
         }
         return out;
       }},
      {"synth.amplitudes",
       [](RunConfig& c, const std::string& v) {
         c.synth.amplitudes = to_doubles("synth.amplitudes", v);
       },
       [](const RunConfig& c) { return join(c.synth.amplitudes); }},
      DLC_DOUBLE("synth.background", synth.background),
      DLC_DOUBLE("synth.jitter", synth.jitter),
      DLC_BOOL("synth.normalize", synth.normalize),
      {"synth.seed",
       [](RunConfig& c, const std::string& v) { c.synth_seed = to_u64("synth.seed", v); },
       [](const RunConfig& c) { return std::to_string(c.synth_seed); }},
  };
  return specs;
}

#undef DLC_SIZE
#undef DLC_DOUBLE
#undef DLC_BOOL
#undef DLC_PATH

const KeySpec& spec_for(const std::string& key) {
  const std::string canon = canonical_key(key);
  for (const auto& s : key_specs()) {
    if (s.key == canon) return s;
  }
  throw ConfigError("unknown configuration key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& s : key_specs()) k.push_back(s.key);
    return k;
  }();
  return keys;
}

std::string canonical_key(const std::string& key) {
  const std::string k = trim(key);
  const auto& keys = config_keys();
  if (std::find(keys.begin(), keys.end(), k) != keys.end()) return k;
  std::vector<std::string> matches;
  for (const auto& full : keys) {
    if (full.size() > k.size() && full.ends_with(k) && full[full.size() - k.size() - 1] == '.') {
      matches.push_back(full);
    }
  }
  if (matches.size() == 1) return matches.front();
  if (matches.empty()) throw ConfigError("unknown configuration key '" + k + "'");
  std::string list;
  for (const auto& m : matches) list += (list.empty() ? "" : ", ") + m;
  throw ConfigError("ambiguous configuration key '" + k + "' (matches " + list + ")");
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  spec_for(key).set(cfg, trim(value));
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  return spec_for(key).get(cfg);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' must have the form key=value");
  }
  set_config_value(cfg, assignment.substr(0, eq), assignment.substr(eq + 1));
}

RunConfig parse_run_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    set_config_value(cfg, line.substr(0, eq), line.substr(eq + 1));
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

std::string dump_run_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& s : key_specs()) out += s.key + " = " + s.get(cfg) + "\n";
  return out;
}

std::filesystem::path resolve_output(const std::filesystem::path& path) {
  if (path.is_absolute()) return path;
  const char* root = std::getenv(kOutputRootEnv);
  if (root == nullptr || *root == '\0') return path;
  return std::filesystem::path(root) / path;
}

std::string method_label(const ModelConfig& cfg) {
  if (!cfg.conditioning) return "Base";
  return "CDCNN_{" + std::to_string(cfg.dilation) + "," + std::to_string(cfg.kernel_h) + "}";
}

}  // namespace dlc
