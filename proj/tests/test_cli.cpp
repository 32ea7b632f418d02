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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#include "dlc/checkpoint.hpp"
#include "dlc/cli.hpp"
#include "dlc/errors.hpp"

using namespace dlc;
namespace fs = std::filesystem;

#ifndef DLC_TOOL_PATH
#error "DLC_TOOL_PATH must point at the command-line tool"
#endif

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dlc_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_tool(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string("\"") + DLC_TOOL_PATH + "\" " + args + " > \"" +
                          log.string() + "\" 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Small enough for a few epochs in well under a second.
const char* kTinyConfig = R"(# tiny run
model.channels = 4,4
model.dw_kernel = 3
model.pools = 4,2
model.temporal_channels = 2
model.kernel = 3
model.dilation = 2
train.epochs = 3
train.batch_size = 4
train.seeds = 0,1
synth.features = 16
synth.steps = 24
synth.train = 6
synth.val = 2
synth.test = 3
synth.dependencies = 0>1:4
)";

}  // namespace

TEST_CASE("defaults reproduce the published configuration shape") {
  const RunConfig cfg;
  CHECK(cfg.model.channels.size() == 3);
  CHECK(cfg.model.dw_kernel_h == 5);
  CHECK(cfg.model.pool_widths == std::vector<std::size_t>{5, 4, 2});
  CHECK(cfg.model.dropout == 0.25);
  CHECK(cfg.model.lrelu_slope == 0.01);
  CHECK(cfg.batch_size == 16);
  CHECK(cfg.patience == 30);
  CHECK(cfg.adam.lr == 1e-3);
  CHECK(cfg.seeds.size() == 10);
  CHECK(cfg.steps == 1024);
  CHECK(cfg.model.num_features == 40);
}

TEST_CASE("overrides select the table configurations") {
  RunConfig cfg;
  apply_override(cfg, "dilation=10");
  apply_override(cfg, "kernel=7");
  CHECK(cfg.model.dilation == 10);
  CHECK(cfg.model.kernel_h == 7);
  CHECK(cfg.model.kernel_w == 7);
  CHECK(method_label(cfg.model) == "CDCNN_{10,7}");
  apply_override(cfg, "conditioning=off");
  CHECK(method_label(cfg.model) == "Base");
  apply_override(cfg, "model.kernel=3x5");
  CHECK(cfg.model.kernel_h == 3);
  CHECK(cfg.model.kernel_w == 5);
  apply_override(cfg, "train.seeds=0-2,7");
  CHECK(cfg.seeds == std::vector<std::uint64_t>{0, 1, 2, 7});
}

TEST_CASE("bad keys and values name the key") {
  RunConfig cfg;
  try {
    apply_override(cfg, "dilationn=10");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("dilationn") != std::string::npos);
  }
  CHECK_THROWS_AS(apply_override(cfg, "classes=3"), ConfigError);  // model. or synth.
  CHECK_THROWS_AS(apply_override(cfg, "dilation=ten"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "dilation"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("model.dilation 4"), ConfigError);
  CHECK(canonical_key("dilation") == "model.dilation");
  CHECK(canonical_key("synth.classes") == "synth.classes");
}

TEST_CASE("config text round trip") {
  RunConfig cfg = parse_run_config(kTinyConfig);
  CHECK(cfg.model.channels == std::vector<std::size_t>{4, 4});
  CHECK(cfg.synth.dependencies.size() == 1);
  CHECK(parse_run_config(dump_run_config(cfg)) == cfg);
  for (const auto& key : config_keys()) {
    CHECK_NOTHROW(set_config_value(cfg, key, get_config_value(cfg, key)));
  }
}

TEST_CASE("relative outputs resolve against the output root") {
  ::setenv(kOutputRootEnv, "/tmp/dlc_root", 1);
  CHECK(resolve_output("runs") == fs::path("/tmp/dlc_root/runs"));
  CHECK(resolve_output("/abs/runs") == fs::path("/abs/runs"));
  ::unsetenv(kOutputRootEnv);
  CHECK(resolve_output("runs") == fs::path("runs"));
}

TEST_CASE("train and evaluate end to end") {
  const fs::path dir = scratch("e2e");
  std::ofstream(dir / "tiny.cfg") << kTinyConfig;
  const std::string c = "-c \"" + (dir / "tiny.cfg").string() + "\"";
  const fs::path log = dir / "out.txt";

  REQUIRE(run_tool("synthgen " + c + " --out \"" + (dir / "data").string() + "\"", log) == 0);
  REQUIRE(run_tool("synthgen " + c + " --out \"" + (dir / "data2").string() + "\"", log) == 0);
  for (const auto& e : fs::directory_iterator(dir / "data")) {
    CHECK(slurp(e.path()) == slurp(dir / "data2" / e.path().filename()));
  }

  const std::string data = " --data \"" + (dir / "data").string() + "\"";
  REQUIRE(run_tool("train " + c + data + " --out \"" + (dir / "base").string() +
                       "\" --set conditioning=off",
                   log) == 0);
  REQUIRE(run_tool("train " + c + data + " --out \"" + (dir / "cd").string() + "\"", log) == 0);
  for (const char* s : {"seed_0", "seed_1"}) {
    CHECK(fs::exists(dir / "cd" / s / "checkpoint.dlck"));
    CHECK(fs::exists(dir / "cd" / s / "train_log.ndjson"));
  }
  CHECK(load_checkpoint(dir / "base" / "seed_0" / "checkpoint.dlck").state.config.conditioning ==
        false);

  REQUIRE(run_tool("evaluate " + c + data + " --out \"" + (dir / "eval").string() +
                       "\" --checkpoint \"" + (dir / "base").string() + "\" \"" +
                       (dir / "cd").string() + "\"",
                   log) == 0);
  const std::string csv = slurp(dir / "eval" / "metrics.csv");
  CHECK(csv.rfind("method,f1_avg,f1_std,f1_delta,er_avg,er_std,er_delta\nBase,", 0) == 0);
  CHECK(csv.find("\"CDCNN_{2,3}\",") != std::string::npos);
  CHECK(fs::exists(dir / "eval" / "eval_report.ndjson"));

  CHECK(run_tool("evaluate " + c + data + " --out \"" + (dir / "eval").string() +
                     "\" --checkpoint \"" + (dir / "nope.dlck").string() + "\"",
                 log) == 3);
  CHECK(slurp(log).find("nope.dlck") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  const fs::path log = dir / "out.txt";
  CHECK(run_tool("train --set dilationn=10", log) == 2);
  CHECK(slurp(log).find("dilationn") != std::string::npos);
  CHECK(run_tool("train --data \"" + (dir / "missing").string() + "\"", log) == 3);
  CHECK(run_tool("frobnicate", log) == 2);
  CHECK(run_tool("gradcheck --layers cdcnn --T 12 --seeds 3", log) == 0);
  CHECK(slurp(log).find("cdcnn") != std::string::npos);
  CHECK(run_tool("gradcheck --layers cdcnn --seeds 2 --tolerance 1e-30", log) == 4);
  CHECK(run_tool("gradcheck --layers nothing", log) == 2);
  fs::remove_all(dir);
}

TEST_CASE("paramcount prints the separable factor") {
  std::ostringstream out;
  ParamCountOptions opts;
  opts.compare = true;
  CHECK(cmd_paramcount(RunConfig{}, opts, out) == 0);
  const std::string s = out.str();
  CHECK(s.find("standard 250000, separable 12500, ratio 0.05") != std::string::npos);
  CHECK(s.find("MISMATCH") == std::string::npos);
  CHECK(s.find("exact match") != std::string::npos);
}

TEST_CASE("bench writes a timing table") {
  const fs::path dir = scratch("bench");
  RunConfig cfg;
  cfg.output_dir = dir;
  BenchOptions opts;
  opts.rows = 64;
  opts.kernels = {3};
  opts.dilations = {1, 10};
  opts.repeats = 1;
  std::ostringstream out;
  CHECK(cmd_bench(cfg, opts, out) == 0);
  CHECK(fs::exists(dir / "bench.csv"));
  fs::remove_all(dir);
}
