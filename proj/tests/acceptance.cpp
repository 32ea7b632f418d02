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

// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero only
// when a gated criterion fails; the conditioning trend is soft.
//
// DLC_TREND_EPOCHS overrides the epoch budget of the trend experiment.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"

#include "dlc/data.hpp"
#include "dlc/errors.hpp"
#include "dlc/gradcheck.hpp"
#include "dlc/metrics.hpp"
#include "dlc/model.hpp"
#include "dlc/optim.hpp"

#ifndef DLC_TOOL_PATH
#error "DLC_TOOL_PATH must point at the command-line tool"
#endif

using namespace dlc;
namespace fs = std::filesystem;

namespace {

enum class Status { kPass, kFail, kSkip };

struct Outcome {
  Status status = Status::kFail;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) {
  return {ok ? Status::kPass : Status::kFail, std::move(detail)};
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void randomize(NamedParams& ps, std::mt19937_64& rng) {
  for (auto& [name, p] : ps) p->value = oracle::random_tensor(p->value.shape(), rng);
}

EvalReport score_split(SedModel& model, const SequenceDataset& data, Split split) {
  const auto idx = data.indices(split);
  const std::vector<Tensor> preds = predict(model, data, idx);
  std::vector<Tensor> labels;
  std::vector<std::size_t> valid;
  for (std::size_t i : idx) {
    labels.push_back(data.items[i].labels);
    valid.push_back(data.items[i].valid);
  }
  return frame_scores(preds, labels, valid);
}

// --- criteria ---------------------------------------------------------------

Outcome desk_scale() {
  return {Status::kSkip,
          "full benchmark reproduction is out of desk-scale reach; criteria 2-11 substitute"};
}

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  GradSuiteOptions opts;  // T = 12, W_f = 6, C = 3, K'_h = 3, dilation 2
  const auto entries = run_gradient_suite(opts);
  const double secs = seconds_since(t0);
  bool ok = entries.size() == gradient_subjects().size();
  double worst = 0.0;
  std::string worst_subject;
  for (const auto& e : entries) {
    ok = ok && e.passed;
    if (e.max_rel_error >= worst) {
      worst = e.max_rel_error;
      worst_subject = e.subject + "/" + e.worst;
    }
  }
  return pass_if(ok && secs < 120.0,
                 fmt("%zu subjects x %zu seeds, max rel err %.2e (%s), %.1f s", entries.size(),
                     opts.seeds, worst, worst_subject.c_str(), secs));
}

Outcome dws_factor() {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<std::size_t> kernel(1, 9), channels(1, 512);
  std::size_t good = 0;
  for (int draw = 0; draw < 50; ++draw) {
    const std::size_t kh = kernel(rng), kw = kernel(rng), ci = channels(rng), co = channels(rng);
    const DwsComparison c = compare_dws(kh, kw, ci, co);
    // separable count taken from instantiated layers
    NamedParams ps;
    DepthwiseConv2d dw(ci, kh, kw, Padding{});
    PointwiseConv2d pw(ci, co);
    dw.collect_params("dw.", ps);
    pw.collect_params("pw.", ps);
    std::size_t separable = 0;
    for (const auto& [name, p] : ps) separable += p->value.size();
    const std::size_t standard = co * ci * kh * kw;
    // separable / standard == 1/co + 1/(kh*kw), cross-multiplied
    const bool exact = separable * co * kh * kw == standard * (kh * kw + co);
    if (exact && c.separable == separable && c.standard == standard && c.matches_factor()) ++good;
  }
  const DwsComparison ref = compare_dws(5, 5, 100, 100);
  const bool published = ref.standard == 250000 && ref.separable == 12500 && ref.ratio == 0.05;
  return pass_if(good == 50 && published,
                 fmt("%zu/50 draws exact; 5x5, C=100: %zu/%zu", good, ref.separable,
                     ref.standard));
}

Outcome shape_law() {
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig cfg;  // published extractor: 3 blocks of 256, 5x5, pools 5/4/2, F = 40
  std::mt19937_64 rng(4);
  const Tensor x = oracle::random_tensor({1, 1024, cfg.num_features}, rng);
  FeatureExtractor ex(cfg, 4);
  ex.set_mode(Mode::kInfer);
  const Tensor h = ex.forward(x);
  const std::size_t wf = cfg.feature_width();
  bool ok = h.shape() == Shape{1, 1024, wf};
  std::size_t good = 0;
  for (std::size_t k : {3u, 5u, 7u}) {
    for (std::size_t xi : {1u, 10u, 50u, 100u}) {
      DilatedConvHead dh(wf, cfg.num_classes, cfg.temporal_channels, k, k, xi, cfg.activation);
      ConditionedDilatedConvHead ch(wf, cfg.num_classes, cfg.temporal_channels, k, k, xi,
                                    cfg.activation);
      const Shape want{1, 1024, cfg.num_classes};
      if (dh.forward(h, nullptr).shape() == want && ch.forward(h, nullptr).shape() == want) {
        ++good;
      }
    }
  }
  SedModel model(cfg, 5);
  model.set_mode(Mode::kInfer);
  ok = ok && model.forward(x).shape() == Shape{1, 1024, cfg.num_classes};
  return pass_if(ok && good == 12, fmt("%zu/12 (K, dilation) pairs keep T=1024 for both heads, "
                                       "W_f=%zu, %.1f s",
                                       good, wf, seconds_since(t0)));
}

Outcome causality() {
  std::mt19937_64 rng(5);
  const std::size_t steps = 48, wf = 5, classes = 3;
  const std::size_t ks[] = {3, 5, 7}, xis[] = {1, 2, 5};
  std::uniform_int_distribution<std::size_t> pick_t(0, steps - 2);
  std::uniform_real_distribution<double> noise(-10.0, 10.0);
  std::size_t good = 0;
  for (int trial = 0; trial < 100; ++trial) {
    ConditionedDilatedConvHead head(wf, classes, 2, ks[trial % 3], 3, xis[(trial / 3) % 3],
                                    Activation::kSigmoid);
    NamedParams ps;
    head.collect_params("", ps);
    randomize(ps, rng);
    const Tensor x = oracle::random_tensor({1, steps, wf}, rng);
    const Tensor base = head.forward(x, nullptr);
    const std::size_t t = pick_t(rng);
    Tensor p = x;
    for (std::size_t i = (t + 1) * wf; i < p.size(); ++i) p[i] = noise(rng);
    const Tensor y = head.forward(p, nullptr);
    bool same = true;
    for (std::size_t i = 0; i < (t + 1) * classes; ++i) same = same && y[i] == base[i];
    bool future_moved = false;
    for (std::size_t i = (t + 1) * classes; i < y.size(); ++i) {
      future_moved = future_moved || y[i] != base[i];
    }
    if (same && future_moved) ++good;
  }
  return pass_if(good == 100, fmt("%zu/100 trials: past rows bitwise equal, future rows moved",
                                  good));
}

Outcome zero_conditioning() {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<std::size_t> dim(2, 7), steps(4, 30), odd(1, 3), dil(1, 4);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t wf = dim(rng), classes = dim(rng), ko = dim(rng);
    const std::size_t kh = 2 * odd(rng) + 1, kw = 2 * odd(rng) - 1, xi = dil(rng);
    ConditionedDilatedConvHead ch(wf, classes, ko, kh, kw, xi, Activation::kSigmoid);
    NamedParams ps;
    ch.collect_params("", ps);
    randomize(ps, rng);
    ch.aff_weight().value.fill(0.0);
    ch.aff_bias().value.fill(0.0);
    DilatedConvHead dh(wf, classes, ko, kh, kw, xi, Activation::kSigmoid, TimePadding::kCausal,
                       2);
    dh.kernel().value = ch.kernel().value;
    dh.classifier().weight().value = ch.cls_weight().value;
    dh.classifier().bias().value = ch.cls_bias().value;
    const Tensor x = oracle::random_tensor({2, steps(rng), wf}, rng);
    worst = std::max(worst, max_abs_diff(ch.forward(x, nullptr), dh.forward(x, nullptr)));
  }
  return pass_if(worst <= 1e-12, fmt("20 instances, max abs diff %.2e", worst));
}

Outcome overfit_smoke() {
  const auto t0 = std::chrono::steady_clock::now();
  SynthConfig s;  // 8 train sequences, T = 64, C = 4, F = 40
  s.dependencies = {{0, 1, 10}, {2, 3, 5}};
  const SequenceDataset data = synth_generate(s, 7);
  std::size_t good = 0;
  std::string per_seed;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ModelConfig cfg;
    cfg.channels = {16, 16, 16};
    cfg.num_features = s.features;
    cfg.num_classes = s.classes;
    cfg.temporal_channels = 8;
    cfg.kernel_h = cfg.kernel_w = 3;
    cfg.dilation = 2;
    SedModel model(cfg, seed);
    TrainOptions opts;
    opts.max_epochs = 500;
    opts.patience = 500;
    opts.seed = seed;
    train(model, data, opts);
    const EvalReport r = score_split(model, data, Split::kTrain);
    if (r.f1 >= 0.95 && r.er <= 0.10) ++good;
    per_seed += fmt(" %.3f/%.3f", r.f1, r.er);
  }
  const double secs = seconds_since(t0);
  return pass_if(good >= 4 && secs < 600.0,
                 fmt("CDCNN_{2,3}: %zu/5 seeds reach F1>=0.95, ER<=0.10 (F1/ER:%s), %.1f s", good,
                     per_seed.c_str(), secs));
}

Outcome conditioning_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t epochs = 20;
  if (const char* e = std::getenv("DLC_TREND_EPOCHS")) epochs = std::strtoul(e, nullptr, 10);
  SynthConfig s;
  s.classes = 8;
  s.steps = 256;
  s.train = 500;
  s.val = 50;
  s.test = 100;
  s.events_per_sequence = 6;
  s.dependencies = {{0, 1, 4}, {2, 3, 4}, {4, 5, 4}, {6, 7, 4}};
  const SequenceDataset data = synth_generate(s, 11);
  std::map<bool, std::vector<double>> f1, er;
  for (bool conditioning : {false, true}) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      ModelConfig cfg;
      cfg.channels = {8, 8, 8};
      cfg.num_features = s.features;
      cfg.num_classes = s.classes;
      cfg.temporal_channels = 8;
      cfg.kernel_h = cfg.kernel_w = 3;
      cfg.dilation = 2;
      cfg.conditioning = conditioning;
      SedModel model(cfg, seed);
      TrainOptions opts;
      opts.max_epochs = epochs;
      opts.seed = seed;
      train(model, data, opts);
      const EvalReport r = score_split(model, data, Split::kTest);
      f1[conditioning].push_back(r.f1);
      er[conditioning].push_back(r.er);
    }
  }
  const double d_f1 = median(f1[true]) - median(f1[false]);
  const double d_er = median(er[true]) - median(er[false]);
  return pass_if(d_f1 >= -0.01,
                 fmt("median test F1 DCNN %.4f, CDCNN %.4f: delta F1 %+.4f, delta ER %+.4f "
                     "(reference +0.02 F1, -0.03 ER); %zu epochs, %.1f s",
                     median(f1[false]), median(f1[true]), d_f1, d_er, epochs,
                     seconds_since(t0)));
}

Outcome metrics_oracle() {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> frames(1, 400), cls(1, 16), seqs(1, 4);
  std::size_t good = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t c = cls(rng), n = seqs(rng);
    std::vector<Tensor> preds, labels;
    std::vector<std::size_t> valid;
    FrameCounts want;
    for (std::size_t q = 0; q < n; ++q) {
      const std::size_t t = frames(rng);
      preds.push_back(oracle::random_tensor({t, c}, rng, 0.0, 1.0));
      labels.push_back(oracle::random_binary({t, c}, rng));
      valid.push_back(std::uniform_int_distribution<std::size_t>(0, t)(rng));
      want += oracle::tally(preds.back(), labels.back(), 0.5, valid.back());
    }
    if (want.n_ref == 0) {  // error rate undefined
      bool threw = false;
      try {
        frame_scores(preds, labels, valid);
      } catch (const NumericalError&) {
        threw = true;
      }
      if (threw) ++good;
      continue;
    }
    const EvalReport r = frame_scores(preds, labels, valid);
    const double f1 =
        want.tp == 0 && want.fp == 0 && want.fn == 0
            ? 0.0
            : 2.0 * want.tp / (2.0 * want.tp + want.fp + want.fn);
    const double er = static_cast<double>(want.s + want.d + want.i) / want.n_ref;
    if (r.counts == want && r.f1 == f1 && r.er == er) ++good;
  }
  // 1..n has mean (n+1)/2 and population variance (n^2-1)/12
  double worst = 0.0;
  for (std::size_t n = 1; n <= 200; ++n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i + 1) / 7.0;
    const Aggregate a = aggregate(v);
    const double mean = (n + 1.0) / 2.0 / 7.0;
    const double std = std::sqrt((static_cast<double>(n) * n - 1.0) / 12.0) / 7.0;
    worst = std::max({worst, std::abs(a.mean - mean), std::abs(a.std - std)});
  }
  return pass_if(good == 1000 && worst <= 1e-12,
                 fmt("%zu/1000 instances exact; aggregate max deviation %.2e", good, worst));
}

Outcome adam() {
  std::mt19937_64 rng(10);
  AdamOptions o;
  oracle::ScalarAdam ref;
  Tensor x = oracle::random_tensor({16}, rng, -3.0, 3.0);
  Tensor m({16}), v({16});
  std::vector<oracle::ScalarAdam> refs(16, ref);
  std::vector<double> xs(x.values().begin(), x.values().end());
  double worst = 0.0;
  for (std::uint64_t step = 1; step <= 100; ++step) {
    const Tensor g = oracle::random_tensor({16}, rng, -2.0, 2.0);
    adam_update(x, g, m, v, step, o);
    for (std::size_t i = 0; i < 16; ++i) {
      xs[i] = refs[i].step(xs[i], g[i]);
      worst = std::max(worst, std::abs(x[i] - xs[i]));
    }
  }
  // identities
  const Tensor start = oracle::random_tensor({32}, rng);
  Tensor a = start, am({32}), av({32});
  AdamOptions zero_lr = o;
  zero_lr.lr = 0.0;
  for (std::uint64_t step = 1; step <= 10; ++step) {
    adam_update(a, oracle::random_tensor({32}, rng), am, av, step, zero_lr);
  }
  Tensor b = start, bm({32}), bv({32});
  for (std::uint64_t step = 1; step <= 10; ++step) adam_update(b, Tensor({32}), bm, bv, step, o);
  const bool identities = a == start && b == start;
  return pass_if(worst <= 1e-12 && identities,
                 fmt("100 steps max diff %.2e; zero-lr and zero-grad %s", worst,
                     identities ? "bitwise identical" : "CHANGED"));
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

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / "dlc_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "run.cfg") << "model.channels = 4,4\n"
                                    "model.dw_kernel = 3\n"
                                    "model.pools = 4,2\n"
                                    "model.temporal_channels = 2\n"
                                    "model.kernel = 3\n"
                                    "model.dilation = 2\n"
                                    "train.epochs = 4\n"
                                    "train.batch_size = 4\n"
                                    "train.seeds = 0,3\n"
                                    "train.wall_time = off\n"
                                    "synth.features = 16\n"
                                    "synth.steps = 32\n"
                                    "synth.train = 8\n"
                                    "synth.val = 2\n"
                                    "synth.dependencies = 0>1:4\n";
  const std::string c = "-c \"" + (dir / "run.cfg").string() + "\"";
  const fs::path log = dir / "out.txt";
  if (run_tool("synthgen " + c + " --out \"" + (dir / "data").string() + "\"", log) != 0) {
    return {Status::kFail, "synthgen failed: " + slurp(log)};
  }
  // same output path both times: the saved run config records it
  for (const char* keep : {"a", "b"}) {
    if (run_tool("train " + c + " --data \"" + (dir / "data").string() + "\" --out \"" +
                     (dir / "run").string() + "\"",
                 log) != 0) {
      return {Status::kFail, "train failed: " + slurp(log)};
    }
    fs::rename(dir / "run", dir / keep);
  }
  std::size_t compared = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(dir / "a")) {
    if (!e.is_regular_file()) continue;
    const fs::path twin = dir / "b" / fs::relative(e.path(), dir / "a");
    ++compared;
    if (!fs::exists(twin) || slurp(e.path()) != slurp(twin)) ++differing;
  }
  const bool has_outputs = fs::exists(dir / "a" / "seed_0" / "checkpoint.dlck") &&
                           fs::exists(dir / "a" / "seed_3" / "train_log.ndjson");
  fs::remove_all(dir);
  return pass_if(has_outputs && differing == 0 && compared >= 4,
                 fmt("%zu files compared, %zu differ", compared, differing));
}

}  // namespace

// argv[1], when given, receives a copy of the report.
int main(int argc, char** argv) {
  std::ofstream report;
  if (argc > 1) report.open(argv[1]);
  auto emit = [&](const std::string& line) {
    std::fputs(line.c_str(), stdout);
    std::fflush(stdout);
    if (report) report << line << std::flush;
  };
  struct Criterion {
    int id;
    const char* name;
    bool gated;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, "benchmark reproduction", false, desk_scale},
      {2, "gradient suite", true, gradient_suite},
      {3, "separable factor", true, dws_factor},
      {4, "shape law", true, shape_law},
      {5, "causality", true, causality},
      {6, "zero-conditioning equivalence", true, zero_conditioning},
      {7, "overfit smoke", true, overfit_smoke},
      {8, "conditioning trend (soft)", false, conditioning_trend},
      {9, "metrics oracle", true, metrics_oracle},
      {10, "optimizer", true, adam},
      {11, "determinism", true, determinism},
  };
  int gated_failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Status::kFail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::kPass ? "PASS" : o.status == Status::kSkip ? "SKIP" : "FAIL";
    if (o.status == Status::kFail && c.gated) ++gated_failures;
    emit(fmt("%s %2d %s%s: ", tag, c.id, c.name, c.gated ? "" : " [not gated]") + o.detail +
         "\n");
  }
  emit(fmt("%d gated failure(s)\n", gated_failures));
  return gated_failures == 0 ? 0 : 1;
}
