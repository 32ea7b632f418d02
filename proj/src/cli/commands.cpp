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
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "dlc/checkpoint.hpp"
#include "dlc/cli.hpp"
#include "dlc/errors.hpp"
#include "dlc/metrics.hpp"

namespace dlc {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

fs::path prepare_output(const fs::path& dir) {
  const fs::path root = resolve_output(dir);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec) throw DataError("cannot create output directory " + root.string() + ": " + ec.message());
  return root;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

}  // namespace

// --- train -----------------------------------------------------------------

int cmd_train(const RunConfig& cfg, std::ostream& out) {
  const SequenceDataset data = load_feature_dir(cfg.data_dir);
  RunConfig resolved = cfg;
  resolved.model.num_features = data.features;
  resolved.model.num_classes = data.classes;
  resolved.model.validate();
  const fs::path root = prepare_output(cfg.output_dir);
  open_out(root / "run_config.cfg") << dump_run_config(resolved);

  out << method_label(resolved.model) << ": " << data.count(Split::kTrain) << " train / "
      << data.count(Split::kVal) << " val sequences, T=" << data.steps << ", F=" << data.features
      << ", C=" << data.classes << "\n";
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = root / ("seed_" + std::to_string(seed));
    fs::create_directories(dir);
    std::ofstream log = open_out(dir / "train_log.ndjson");

    SedModel model(resolved.model, seed);
    TrainOptions opts;
    opts.max_epochs = cfg.epochs;
    opts.batch_size = cfg.batch_size;
    opts.patience = cfg.patience;
    opts.adam = cfg.adam;
    opts.seed = seed;
    opts.record_wall_time = cfg.wall_time;
    opts.on_epoch = [&log](const EpochRecord& r) { log << to_ndjson(r) << '\n' << std::flush; };
    const TrainResult result = train(model, data, opts);

    Checkpoint ckpt;
    ckpt.state = result.best;
    ckpt.metadata = {{"seed", std::to_string(seed)},
                     {"best_epoch", std::to_string(result.best_epoch)},
                     {"epochs_run", std::to_string(result.log.size())},
                     {"method", method_label(resolved.model)}};
    save_checkpoint(dir / "checkpoint.dlck", ckpt);
    out << "seed " << seed << ": " << result.log.size() << " epochs, best epoch "
        << result.best_epoch << ", val loss " << fixed(result.best_val_loss, 6)
        << (result.early_stopped ? " (early stop)" : "") << "\n";
  }
  return 0;
}

// --- evaluate --------------------------------------------------------------

namespace {

std::vector<fs::path> expand_checkpoints(const std::vector<fs::path>& inputs) {
  std::vector<fs::path> out;
  for (const auto& p : inputs) {
    if (!fs::exists(p)) throw DataError("checkpoint path not found: " + p.string());
    if (!fs::is_directory(p)) {
      out.push_back(p);
      continue;
    }
    std::vector<fs::path> found;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file() && e.path().extension() == ".dlck") found.push_back(e.path());
    }
    if (found.empty()) throw DataError("no checkpoints (*.dlck) under " + p.string());
    std::sort(found.begin(), found.end());
    out.insert(out.end(), found.begin(), found.end());
  }
  if (out.empty()) throw ConfigError("evaluate: no checkpoints given");
  return out;
}

}  // namespace

int cmd_evaluate(const RunConfig& cfg, const std::vector<fs::path>& checkpoints,
                 std::ostream& out) {
  const auto paths = expand_checkpoints(checkpoints);
  const SequenceDataset data = load_feature_dir(cfg.data_dir);
  const Split split = parse_split(cfg.eval_split);
  const auto idx = data.indices(split);
  if (idx.empty()) throw DataError("evaluate: the " + cfg.eval_split + " split is empty");
  std::vector<Tensor> labels;
  std::vector<std::size_t> valid;
  for (std::size_t i : idx) {
    labels.push_back(data.items[i].labels);
    valid.push_back(data.items[i].valid);
  }

  const fs::path root = prepare_output(cfg.output_dir);
  std::ofstream report = open_out(root / "eval_report.ndjson");
  std::vector<std::string> methods;
  std::map<std::string, std::vector<EvalReport>> runs;
  for (const auto& path : paths) {
    const Checkpoint ckpt = load_checkpoint(path);
    const ModelConfig& mc = ckpt.state.config;
    if (mc.num_features != data.features || mc.num_classes != data.classes) {
      throw DataError("checkpoint " + path.string() + " expects F=" +
                      std::to_string(mc.num_features) + ", C=" + std::to_string(mc.num_classes) +
                      " but the dataset has F=" + std::to_string(data.features) +
                      ", C=" + std::to_string(data.classes));
    }
    SedModel model(mc, 0);
    model.load_state(ckpt.state);
    const auto preds = predict(model, data, idx);
    EvalReport r = frame_scores(preds, labels, valid, cfg.threshold);
    const std::string method = method_label(mc);
    if (!runs.contains(method)) methods.push_back(method);
    runs[method].push_back(r);

    ordered_json j = ordered_json::parse(report_json(r));
    j["type"] = "run";
    j["method"] = method;
    j["checkpoint"] = path.string();
    report << j.dump() << '\n';
    out << method << "  " << path.string() << "  F1 " << fixed(r.f1) << "  ER " << fixed(r.er)
        << "\n";
  }

  std::vector<TableRow> rows;
  for (const auto& method : methods) {
    const EvalReport agg = aggregate_runs(runs[method]);
    ordered_json j;
    j["type"] = "aggregate";
    j["method"] = method;
    j["runs"] = agg.per_run.size();
    j["f1_mean"] = agg.f1_agg.mean;
    j["f1_std"] = agg.f1_agg.std;
    j["er_mean"] = agg.er_agg.mean;
    j["er_std"] = agg.er_agg.std;
    report << j.dump() << '\n';
    rows.push_back({method, agg.f1_agg, agg.er_agg});
    out << method << "  runs " << agg.per_run.size() << "  F1 " << fixed(agg.f1_agg.mean)
        << " +/- " << fixed(agg.f1_agg.std) << "  ER " << fixed(agg.er_agg.mean) << " +/- "
        << fixed(agg.er_agg.std) << "\n";
  }
  std::ofstream csv = open_out(root / "metrics.csv");
  write_metrics_csv(csv, rows);
  return 0;
}

// --- gradcheck -------------------------------------------------------------

int cmd_gradcheck(const GradSuiteOptions& opts, std::ostream& out) {
  const auto start = std::chrono::steady_clock::now();
  const auto entries = run_gradient_suite(opts);
  bool ok = true;
  out << std::left << std::setw(12) << "subject" << std::setw(7) << "runs" << std::setw(10)
      << "entries" << std::setw(9) << "skipped" << std::setw(14) << "max_rel_err"
      << "result\n";
  for (const auto& e : entries) {
    out << std::left << std::setw(12) << e.subject << std::setw(7) << e.runs << std::setw(10)
        << e.checked << std::setw(9) << e.skipped << std::setw(14) << std::scientific << std::setprecision(3)
        << e.max_rel_error << std::defaultfloat << (e.passed ? "PASS" : "FAIL");
    if (!e.passed) out << "  (worst: " << e.worst << ")";
    out << "\n";
    ok = ok && e.passed;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  out << (ok ? "all subjects pass" : "gradient check FAILED") << " (tolerance "
      << opts.check.tolerance << ", " << fixed(secs, 1) << " s)\n";
  return ok ? 0 : 4;
}

// --- paramcount ------------------------------------------------------------

namespace {

void print_comparison(std::ostream& out, const std::string& what, const DwsComparison& c) {
  out << what << ": standard " << c.standard << ", separable " << c.separable << ", ratio "
      << std::setprecision(10) << c.ratio << std::defaultfloat << std::setprecision(6)
      << " = " << c.separable << "/" << c.standard << "; 1/K_o + 1/(K_h*K_w) = "
      << c.factor_numerator << "/" << c.factor_denominator << " -> "
      << (c.matches_factor() ? "exact match" : "MISMATCH") << "\n";
}

}  // namespace

int cmd_paramcount(const RunConfig& cfg, const ParamCountOptions& opts, std::ostream& out) {
  const ModelConfig& mc = cfg.model;
  const ParamCount pc = param_count(mc);
  out << method_label(mc) << " (F=" << mc.num_features << ", C=" << mc.num_classes << ")\n";
  for (const auto& [name, count] : pc.components) {
    out << "  " << std::left << std::setw(26) << name << std::right << std::setw(12) << count
        << "\n";
  }
  out << "  " << std::left << std::setw(26) << "total" << std::right << std::setw(12)
      << pc.total << "\n";
  std::size_t in = 1;
  bool ok = true;
  for (std::size_t l = 0; l < mc.blocks(); ++l) {
    const auto c = compare_dws(mc.dw_kernel_h, mc.dw_kernel_w, in, mc.channels[l]);
    print_comparison(out, "block" + std::to_string(l), c);
    ok = ok && c.matches_factor();
    in = mc.channels[l];
  }
  if (opts.compare) {
    const auto c = compare_dws(opts.kernel_h, opts.kernel_w, opts.in_channels, opts.out_channels);
    print_comparison(out,
                     "K=" + std::to_string(opts.kernel_h) + "x" + std::to_string(opts.kernel_w) +
                         ", C_in=" + std::to_string(opts.in_channels) +
                         ", K_o=" + std::to_string(opts.out_channels),
                     c);
    ok = ok && c.matches_factor();
  }
  return ok ? 0 : 4;
}

// --- synthgen --------------------------------------------------------------

int cmd_synthgen(const RunConfig& cfg, std::ostream& out) {
  const SequenceDataset data = synth_generate(cfg.synth, cfg.synth_seed);
  const fs::path root = resolve_output(cfg.output_dir);
  save_feature_dir(data, root);
  out << "wrote " << data.items.size() << " sequences (" << data.count(Split::kTrain)
      << " train, " << data.count(Split::kVal) << " val, " << data.count(Split::kTest)
      << " test; T=" << data.steps << ", F=" << data.features << ", C=" << data.classes
      << ") to " << root.string() << "\n";
  return 0;
}

// --- bench -----------------------------------------------------------------

int cmd_bench(const RunConfig& cfg, const BenchOptions& opts, std::ostream& out) {
  const fs::path root = prepare_output(cfg.output_dir);
  std::ofstream csv = open_out(root / "bench.csv");
  csv << "kernel,dilation,rows,width,in_channels,out_channels,direct_ms,im2col_ms,speedup,"
         "max_abs_diff\n";
  out << std::left << std::setw(8) << "kernel" << std::setw(10) << "dilation" << std::setw(12)
      << "direct_ms" << std::setw(12) << "im2col_ms" << std::setw(10) << "speedup"
      << "max_abs_diff\n";
  std::mt19937_64 rng(cfg.synth_seed);
  const Tensor input =
      random_uniform({opts.in_channels, opts.rows, opts.width}, -1.0, 1.0, rng);
  const auto time_ms = [&](auto&& fn, Tensor& result) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(opts.repeats, 1); ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      result = fn();
      best = std::min(best, std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - t0)
                                .count());
    }
    return best;
  };
  for (std::size_t k : opts.kernels) {
    for (std::size_t d : opts.dilations) {
      const Tensor kernels =
          random_uniform({opts.out_channels, opts.in_channels, k, k}, -1.0, 1.0, rng);
      Padding pad{d * (k - 1) / 2, d * (k - 1) - d * (k - 1) / 2, (k - 1) / 2,
                  k - 1 - (k - 1) / 2};
      Tensor a, b;
      const double direct = time_ms([&] { return conv2d(input, kernels, {d, 1}, pad); }, a);
      const double lowered =
          time_ms([&] { return conv2d_im2col(input, kernels, {d, 1}, pad); }, b);
      const double diff = max_abs_diff(a, b);
      out << std::left << std::setw(8) << k << std::setw(10) << d << std::setw(12)
          << fixed(direct, 2) << std::setw(12) << fixed(lowered, 2) << std::setw(10)
          << fixed(direct / lowered, 2) << std::scientific << std::setprecision(2) << diff
          << std::defaultfloat << "\n";
      csv << k << ',' << d << ',' << opts.rows << ',' << opts.width << ',' << opts.in_channels
          << ',' << opts.out_channels << ',' << fixed(direct, 3) << ',' << fixed(lowered, 3)
          << ',' << fixed(direct / lowered, 3) << ',' << diff << '\n';
    }
  }
  return 0;
}

// --- extract ---------------------------------------------------------------

int cmd_extract(const RunConfig& cfg, std::ostream& out) {
  struct Recording {
    std::string id;
    Split split;
    Tensor features;
    std::vector<EventAnnotation> events;
    FrameLayout layout;
    double rate;
  };
  std::vector<Recording> recs;
  for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
    const fs::path dir = cfg.audio_dir / std::string(split_name(split));
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> wavs;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".wav") wavs.push_back(e.path());
    }
    std::sort(wavs.begin(), wavs.end());
    for (const auto& wav : wavs) {
      const AudioBuffer audio = read_wav(wav);
      fs::path ann = wav;
      ann.replace_extension(".txt");
      Recording r{std::string(split_name(split)) + "_" + wav.stem().string(), split,
                  extract_logmel(audio), read_annotations(ann),
                  frame_layout(audio.sample_rate), audio.sample_rate};
      recs.push_back(std::move(r));
    }
  }
  if (recs.empty()) {
    throw DataError("extract: no .wav files under " + cfg.audio_dir.string() +
                    "/{train,val,test}");
  }

  std::vector<std::string> names = cfg.class_names;
  if (names.empty()) {
    std::set<std::string> seen;
    for (const auto& r : recs) {
      for (const auto& e : r.events) seen.insert(e.label);
    }
    names.assign(seen.begin(), seen.end());
  }
  if (names.empty()) throw DataError("extract: no classes found in the annotations");

  std::vector<Tensor> train_features;
  for (const auto& r : recs) {
    if (r.split == Split::kTrain) train_features.push_back(r.features);
  }
  if (train_features.empty()) throw DataError("extract: the train split has no recordings");
  const NormStats stats = compute_norm_stats(train_features);

  SequenceDataset data;
  data.class_names = names;
  data.steps = cfg.steps;
  data.features = train_features.front().dim(1);
  data.classes = names.size();
  data.norm = stats;
  for (const auto& r : recs) {
    const Tensor labels = frame_labels(r.events, names, r.features.dim(0), r.layout, r.rate);
    for (auto& item : chunk_and_normalize(r.features, labels, stats, cfg.steps, r.id, r.split)) {
      data.items.push_back(std::move(item));
    }
  }
  std::sort(data.items.begin(), data.items.end(),
            [](const SequenceItem& a, const SequenceItem& b) { return a.id < b.id; });
  const fs::path root = resolve_output(cfg.output_dir);
  save_feature_dir(data, root);
  out << "extracted " << recs.size() << " recordings into " << data.items.size()
      << " sequences of T=" << cfg.steps << " (" << data.classes << " classes) at "
      << root.string() << "\n";
  return 0;
}

}  // namespace dlc
