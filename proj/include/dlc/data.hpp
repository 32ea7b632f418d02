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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlc/tensor.hpp"

namespace dlc {

enum class Split { kTrain, kVal, kTest };

std::string_view split_name(Split split);
// Accepts "train", "val"/"validation", "test"; throws DataError otherwise.
Split parse_split(std::string_view name);

struct SequenceItem {
  std::string id;
  Split split = Split::kTrain;
  Tensor features;        // T x F
  Tensor labels;          // T x C, entries in {0, 1}
  std::size_t valid = 0;  // leading frames carrying real data; the rest is padding

  bool operator==(const SequenceItem&) const = default;
};

// Per-band normalization statistics, always computed on the training split.
struct NormStats {
  Tensor mean;  // F
  Tensor std;   // F, floored to stay positive

  bool operator==(const NormStats&) const = default;
};

struct SequenceDataset {
  std::vector<std::string> class_names;
  std::size_t steps = 0;     // T
  std::size_t features = 0;  // F
  std::size_t classes = 0;   // C
  std::vector<SequenceItem> items;
  std::optional<NormStats> norm;

  std::vector<std::size_t> indices(Split split) const;
  std::size_t count(Split split) const { return indices(split).size(); }

  // Checks shared shapes, binary labels and valid counts; throws DataError
  // naming the offending item.
  void validate() const;

  bool operator==(const SequenceDataset&) const = default;
};

// Stacked view of some dataset items.
struct Batch {
  Tensor features;                // N x T x F
  Tensor labels;                  // N x T x C
  std::vector<std::size_t> valid; // per sequence
};

Batch make_batch(const SequenceDataset& data, std::span<const std::size_t> indices);

inline constexpr double kStdFloor = 1e-5;

// Statistics over the valid frames of every training item.
NormStats compute_norm_stats(const SequenceDataset& data, double std_floor = kStdFloor);
// Statistics over all rows of the given frames x F matrices.
NormStats compute_norm_stats(std::span<const Tensor> matrices, double std_floor = kStdFloor);

// Normalizes the valid frames of every item in place; padded frames stay 0.
void apply_norm(SequenceDataset& data, const NormStats& stats);

// Splits a (frames x F, frames x C) recording into non-overlapping chunks of
// `steps` frames. The final chunk is zero-padded and its `valid` count marks
// the real frames. Features are normalized band-wise with `stats`.
std::vector<SequenceItem> chunk_and_normalize(const Tensor& features, const Tensor& labels,
                                              const NormStats& stats, std::size_t steps,
                                              const std::string& id_prefix, Split split);

// --- Audio front end -------------------------------------------------------

struct AudioBuffer {
  std::vector<double> samples;  // interleaved if channels > 1, in [-1, 1)
  double sample_rate = 0.0;
  std::size_t channels = 1;
};

// Reads 16- or 24-bit PCM RIFF/WAVE files.
AudioBuffer read_wav(const std::filesystem::path& path);
void write_wav16(const std::filesystem::path& path, const AudioBuffer& audio);

struct LogMelOptions {
  std::size_t bands = 40;
  double log_floor = 1e-10;
  // The analysis window is 1024 samples at 44.1 kHz and scales
  // proportionally with the sample rate; hop is half the window.
  std::size_t reference_window = 1024;
  double reference_rate = 44100.0;
};

struct FrameLayout {
  std::size_t window = 0;
  std::size_t hop = 0;
  std::size_t fft_size = 0;  // next power of two >= window
};

FrameLayout frame_layout(double sample_rate, const LogMelOptions& opts = {});
std::size_t frame_count(std::size_t samples, const FrameLayout& layout);

double hz_to_mel(double hz);
double mel_to_hz(double mel);
// Triangular, area-normalized filters spanning 0 Hz to Nyquist:
// bands x (fft_size / 2 + 1).
Tensor mel_filterbank(std::size_t bands, std::size_t fft_size, double sample_rate);
// Center frequency (Hz) of each mel band.
std::vector<double> mel_band_centers(std::size_t bands, double sample_rate);

// frames x bands natural-log mel energies of a Hamming-windowed magnitude
// spectrum. Throws DataError on empty or multi-channel input.
Tensor extract_logmel(const AudioBuffer& audio, const LogMelOptions& opts = {});

struct EventAnnotation {
  double onset = 0.0;   // seconds
  double offset = 0.0;  // seconds
  std::string label;
};

// Whitespace separated "onset offset label" lines; '#' starts a comment.
std::vector<EventAnnotation> read_annotations(const std::filesystem::path& path);

// frames x C activity matrix; a frame is active when its center lies in
// [onset, offset).
Tensor frame_labels(std::span<const EventAnnotation> events,
                    std::span<const std::string> class_names, std::size_t frames,
                    const FrameLayout& layout, double sample_rate);

// --- Feature directory -----------------------------------------------------
//
// <dir>/manifest.json  ids, splits, valid counts, class names, T, F, C, norm
// <dir>/<id>.features.dlc, <dir>/<id>.labels.dlc  DLC1 tensors

void save_feature_dir(const SequenceDataset& data, const std::filesystem::path& dir);
// Items come back ordered lexicographically by id.
SequenceDataset load_feature_dir(const std::filesystem::path& dir);

// --- Synthetic data --------------------------------------------------------

// Every onset of `consequent` starts within [0, max_gap] frames after an
// offset of `antecedent`.
struct Dependency {
  std::size_t antecedent = 0;
  std::size_t consequent = 0;
  std::size_t max_gap = 0;

  bool operator==(const Dependency&) const = default;
};

struct SynthConfig {
  std::size_t classes = 4;
  std::size_t features = 40;
  std::size_t steps = 64;
  std::size_t train = 8;
  std::size_t val = 2;
  std::size_t test = 2;
  std::size_t max_polyphony = 5;
  std::size_t min_event = 4;         // frames
  std::size_t max_event = 16;        // frames
  std::size_t events_per_sequence = 4;  // placement attempts for independent classes
  std::vector<Dependency> dependencies;
  std::vector<double> amplitudes;    // per class; empty means all 1
  double background = 0.1;
  double jitter = 0.1;               // log-normal spread of energies
  bool normalize = true;

  // Throws ConfigError on bad indices, empty ranges or dependency cycles.
  void validate() const;

  bool operator==(const SynthConfig&) const = default;
};

// Feature-domain mixtures of band-limited class templates with
// frame-accurate labels. Deterministic for a given seed.
SequenceDataset synth_generate(const SynthConfig& cfg, std::uint64_t seed);

}  // namespace dlc
