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

#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "dlc/cli.hpp"
#include "dlc/errors.hpp"

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Common {
  std::string config;
  std::vector<std::string> overrides;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "Config file with 'key = value' lines");
    cmd->add_option("-s,--set", overrides, "Override a key, e.g. --set dilation=10")
        ->take_all();
  }

  dlc::RunConfig load(const std::vector<std::pair<std::string, std::string>>& shortcuts) const {
    dlc::RunConfig cfg = config.empty() ? dlc::RunConfig{} : dlc::load_run_config(config);
    for (const auto& [key, value] : shortcuts) {
      if (!value.empty()) dlc::set_config_value(cfg, key, value);
    }
    for (const auto& o : overrides) dlc::apply_override(cfg, o);
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sound event detection with conditioned time-dilated convolutions"};
  app.require_subcommand(1);

  Common common;
  std::string data, out, seeds, split, threshold, seed, audio, steps;

  auto* train = app.add_subcommand("train", "Train one model per seed");
  common.attach(train);
  train->add_option("--data", data, "Feature directory (data.dir)");
  train->add_option("--out", out, "Output directory (output.dir)");
  train->add_option("--seeds", seeds, "Seed list, e.g. 0-9 (train.seeds)");

  std::vector<std::string> checkpoints;
  auto* evaluate = app.add_subcommand("evaluate", "Score checkpoints with frame F1 and ER");
  common.attach(evaluate);
  evaluate->add_option("--checkpoint", checkpoints, "Checkpoint files or run directories")
      ->required()
      ->take_all();
  evaluate->add_option("--data", data, "Feature directory (data.dir)");
  evaluate->add_option("--out", out, "Output directory (output.dir)");
  evaluate->add_option("--split", split, "Split to score (eval.split)");
  evaluate->add_option("--threshold", threshold, "Binarization threshold (eval.threshold)");

  dlc::GradSuiteOptions grad;
  std::string layers;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gradcheck->add_option("--layers", layers, "Comma-separated subjects (default: all)");
  gradcheck->add_option("--T", grad.steps, "Sequence length of head and model instances");
  gradcheck->add_option("--seeds", grad.seeds, "Random instances per subject");
  gradcheck->add_option("--tolerance", grad.check.tolerance, "Max relative error");
  gradcheck->add_option("--step", grad.check.step, "Central difference step");

  dlc::ParamCountOptions pc;
  auto* paramcount = app.add_subcommand("paramcount", "Parameter counts and the DWS factor");
  common.attach(paramcount);
  paramcount->add_flag("--compare", pc.compare, "Compare standard and DWS convolutions");
  paramcount->add_option("--kernel-h", pc.kernel_h, "Kernel height for --compare");
  paramcount->add_option("--kernel-w", pc.kernel_w, "Kernel width for --compare");
  paramcount->add_option("--in", pc.in_channels, "Input channels for --compare");
  paramcount->add_option("--out-channels", pc.out_channels, "Output channels K_o for --compare");

  auto* synthgen = app.add_subcommand("synthgen", "Generate a synthetic feature directory");
  common.attach(synthgen);
  synthgen->add_option("--out", out, "Output directory (output.dir)");
  synthgen->add_option("--seed", seed, "Generator seed (synth.seed)");

  dlc::BenchOptions bench_opts;
  auto* bench = app.add_subcommand("bench", "Direct versus im2col convolution timing");
  common.attach(bench);
  bench->add_option("--out", out, "Output directory (output.dir)");
  bench->add_option("--rows", bench_opts.rows, "Input rows (time steps)");
  bench->add_option("--width", bench_opts.width, "Input width");
  bench->add_option("--repeats", bench_opts.repeats, "Timing repetitions (minimum is kept)");
  bench->add_option("--kernels", bench_opts.kernels, "Kernel sizes")->delimiter(',');
  bench->add_option("--dilations", bench_opts.dilations, "Time dilations")->delimiter(',');

  auto* extract = app.add_subcommand("extract", "Log-mel features from WAV files");
  common.attach(extract);
  extract->add_option("--audio", audio, "Directory with train/val/test subdirectories");
  extract->add_option("--out", out, "Output feature directory (output.dir)");
  extract->add_option("--steps", steps, "Sequence length T (extract.steps)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (train->parsed()) {
      const auto cfg = common.load({{"data.dir", data}, {"output.dir", out}, {"train.seeds", seeds}});
      return dlc::cmd_train(cfg, std::cout);
    }
    if (evaluate->parsed()) {
      const auto cfg = common.load({{"data.dir", data},
                                    {"output.dir", out},
                                    {"eval.split", split},
                                    {"eval.threshold", threshold}});
      std::vector<std::filesystem::path> paths(checkpoints.begin(), checkpoints.end());
      return dlc::cmd_evaluate(cfg, paths, std::cout);
    }
    if (gradcheck->parsed()) {
      grad.subjects = split_list(layers);
      return dlc::cmd_gradcheck(grad, std::cout);
    }
    if (paramcount->parsed()) return dlc::cmd_paramcount(common.load({}), pc, std::cout);
    if (synthgen->parsed()) {
      return dlc::cmd_synthgen(common.load({{"output.dir", out}, {"synth.seed", seed}}),
                               std::cout);
    }
    if (bench->parsed()) {
      return dlc::cmd_bench(common.load({{"output.dir", out}}), bench_opts, std::cout);
    }
    if (extract->parsed()) {
      const auto cfg = common.load(
          {{"extract.audio_dir", audio}, {"output.dir", out}, {"extract.steps", steps}});
      return dlc::cmd_extract(cfg, std::cout);
    }
  } catch (const dlc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dlc::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const dlc::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
