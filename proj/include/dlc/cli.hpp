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
#include <iosfwd>
#include <string>
#include <vector>

#include "dlc/data.hpp"
#include "dlc/gradcheck.hpp"
#include "dlc/model.hpp"
#include "dlc/optim.hpp"

namespace dlc {

// Everything a command needs. Defaults are the published training setup.
struct RunConfig {
  ModelConfig model;

  std::size_t epochs = 1000;
  std::size_t batch_size = 16;
  std::size_t patience = 30;
  AdamOptions adam;
  bool wall_time = true;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  std::filesystem::path data_dir = "features";
  std::filesystem::path output_dir = "runs";
  double threshold = 0.5;
  std::string eval_split = "test";

  // extract
  std::filesystem::path audio_dir = "audio";
  std::size_t steps = 1024;
  std::vector<std::string> class_names;  // empty: collect from annotations

  SynthConfig synth;
  std::uint64_t synth_seed = 0;

  bool operator==(const RunConfig&) const = default;
};

// Environment variable holding the root for relative output paths.
inline constexpr const char* kOutputRootEnv = "DLC_OUTPUT_ROOT";

// Canonical dotted keys accepted in config files and overrides.
const std::vector<std::string>& config_keys();

// Resolves a dotted key or a unique suffix ("dilation" -> "model.dilation").
// Throws ConfigError naming the key when it is unknown or ambiguous.
std::string canonical_key(const std::string& key);

// Sets one key; throws ConfigError naming the key on a bad value.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

// "key=value".
void apply_override(RunConfig& cfg, const std::string& assignment);

// "key = value" lines; '#' starts a comment; blank lines are ignored.
RunConfig parse_run_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);
// Every key in canonical order; parse_run_config(dump_run_config(c)) == c.
std::string dump_run_config(const RunConfig& cfg);

// Output paths are resolved against $DLC_OUTPUT_ROOT when relative.
std::filesystem::path resolve_output(const std::filesystem::path& path);

// "Base" for the unconditioned model, otherwise "CDCNN_{xi,K}".
std::string method_label(const ModelConfig& cfg);

// --- Commands --------------------------------------------------------------
// Each writes a human-readable summary to `out` and returns the process
// exit code for non-exceptional outcomes. Errors propagate as exceptions.

// One run per seed: <output>/seed_<s>/{checkpoint.dlck,train_log.ndjson}
// plus <output>/run_config.cfg.
int cmd_train(const RunConfig& cfg, std::ostream& out);

// Scores checkpoints on cfg.eval_split of cfg.data_dir. Writes
// <output>/eval_report.ndjson and <output>/metrics.csv.
int cmd_evaluate(const RunConfig& cfg, const std::vector<std::filesystem::path>& checkpoints,
                 std::ostream& out);

int cmd_gradcheck(const GradSuiteOptions& opts, std::ostream& out);

struct ParamCountOptions {
  bool compare = false;  // also print standard-vs-separable comparison
  std::size_t kernel_h = 5;
  std::size_t kernel_w = 5;
  std::size_t in_channels = 100;
  std::size_t out_channels = 100;
};
int cmd_paramcount(const RunConfig& cfg, const ParamCountOptions& opts, std::ostream& out);

// Writes a synthetic feature directory to the output directory.
int cmd_synthgen(const RunConfig& cfg, std::ostream& out);

struct BenchOptions {
  std::size_t rows = 1024;
  std::size_t width = 16;
  std::size_t in_channels = 2;
  std::size_t out_channels = 16;
  std::vector<std::size_t> kernels{3, 5, 7};
  std::vector<std::size_t> dilations{1, 10};
  std::size_t repeats = 3;
};
// Direct versus im2col convolution timing; also writes <output>/bench.csv.
int cmd_bench(const RunConfig& cfg, const BenchOptions& opts, std::ostream& out);

// Log-mel features from <audio_dir>/{train,val,test}/*.wav with matching
// *.txt annotations, chunked to `steps` and normalized with training
// statistics, written as a feature directory to the output directory.
int cmd_extract(const RunConfig& cfg, std::ostream& out);

}  // namespace dlc
