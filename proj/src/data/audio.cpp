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

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "dlc/data.hpp"
#include "dlc/errors.hpp"

namespace dlc {

// --- WAV -------------------------------------------------------------------

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open audio file " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const auto fail = [&](const std::string& why) {
    return DataError("audio file " + path.string() + ": " + why);
  };
  if (bytes.size() < 12 || bytes.compare(0, 4, "RIFF") != 0 || bytes.compare(8, 4, "WAVE") != 0) {
    throw fail("not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* pcm = nullptr;
  std::size_t pcm_bytes = 0;
  while (pos + 8 <= bytes.size()) {
    const std::string id = bytes.substr(pos, 4);
    const std::size_t size = read_u32(p + pos + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size() && id != "data") throw fail("truncated chunk " + id);
    if (id == "fmt ") {
      if (size < 16) throw fail("short fmt chunk");
      format = read_u16(p + body);
      channels = read_u16(p + body + 2);
      rate = read_u32(p + body + 4);
      bits = read_u16(p + body + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real format tag in the sub-format GUID
      if (format == 0xFFFE && size >= 26) format = read_u16(p + body + 24);
    } else if (id == "data") {
      pcm = p + body;
      pcm_bytes = std::min(size, bytes.size() - body);
    }
    pos = body + size + (size & 1);
  }
  if (format == 0) throw fail("missing fmt chunk");
  if (pcm == nullptr) throw fail("missing data chunk");
  if (format != 1) throw fail("only PCM encoding is supported");
  if (bits != 16 && bits != 24) {
    throw fail("unsupported bit depth " + std::to_string(bits) + " (expected 16 or 24)");
  }
  if (channels == 0 || rate == 0) throw fail("invalid channel count or sample rate");
  AudioBuffer audio;
  audio.sample_rate = rate;
  audio.channels = channels;
  const std::size_t width = bits / 8;
  const std::size_t count = pcm_bytes / width;
  audio.samples.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned char* s = pcm + i * width;
    if (bits == 16) {
      audio.samples[i] = static_cast<std::int16_t>(read_u16(s)) / 32768.0;
    } else {
      std::int32_t v = s[0] | (s[1] << 8) | (s[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      audio.samples[i] = v / 8388608.0;
    }
  }
  return audio;
}

void write_wav16(const std::filesystem::path& path, const AudioBuffer& audio) {
  const std::size_t channels = audio.channels;
  const auto rate = static_cast<std::uint32_t>(std::lround(audio.sample_rate));
  std::string out = "RIFF";
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  put_u32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  put_u32(out, 16);
  put_u16(out, 1);
  put_u16(out, static_cast<std::uint16_t>(channels));
  put_u32(out, rate);
  put_u32(out, rate * static_cast<std::uint32_t>(channels) * 2);
  put_u16(out, static_cast<std::uint16_t>(channels * 2));
  put_u16(out, 16);
  out += "data";
  put_u32(out, data_bytes);
  for (double s : audio.samples) {
    const double clipped = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(clipped)));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f || !f.write(out.data(), static_cast<std::streamsize>(out.size()))) {
    throw DataError("cannot write audio file " + path.string());
  }
}

// --- Log-mel features ------------------------------------------------------

FrameLayout frame_layout(double sample_rate, const LogMelOptions& opts) {
  if (!(sample_rate > 0.0)) throw DataError("sample rate must be positive");
  FrameLayout l;
  l.window = static_cast<std::size_t>(
      std::lround(static_cast<double>(opts.reference_window) * sample_rate / opts.reference_rate));
  l.window = std::max<std::size_t>(l.window, 2);
  l.hop = l.window / 2;
  l.fft_size = std::bit_ceil(l.window);
  return l;
}

std::size_t frame_count(std::size_t samples, const FrameLayout& layout) {
  if (samples < layout.window) return 0;
  return (samples - layout.window) / layout.hop + 1;
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

// bands + 2 edge frequencies, evenly spaced in mel between 0 and Nyquist.
std::vector<double> mel_edges(std::size_t bands, double sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(bands + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(bands + 1));
  }
  return edges;
}

}  // namespace

std::vector<double> mel_band_centers(std::size_t bands, double sample_rate) {
  const auto edges = mel_edges(bands, sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

Tensor mel_filterbank(std::size_t bands, std::size_t fft_size, double sample_rate) {
  if (bands == 0 || fft_size < 2) throw ConfigError("mel filterbank: empty configuration");
  const auto edges = mel_edges(bands, sample_rate);
  const std::size_t bins = fft_size / 2 + 1;
  Tensor fb({bands, bins});
  for (std::size_t m = 0; m < bands; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    const double area = 2.0 / (hi - lo);
    for (std::size_t k = 0; k < bins; ++k) {
      const double hz = static_cast<double>(k) * sample_rate / static_cast<double>(fft_size);
      const double up = (hz - lo) / (mid - lo);
      const double down = (hi - hz) / (hi - mid);
      fb[m * bins + k] = std::max(0.0, std::min(up, down)) * area;
    }
  }
  return fb;
}

namespace {

std::vector<double> hamming(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  }
  return w;
}

class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        in_(fftw_alloc_real(n)),
        out_(fftw_alloc_complex(n / 2 + 1)),
        plan_(fftw_plan_dft_r2c_1d(static_cast<int>(n), in_, out_, FFTW_ESTIMATE)) {}
  ~RealFft() {
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  // |X[k]| for k in [0, n/2]
  void magnitude(std::vector<double>& out) {
    fftw_execute(plan_);
    out.resize(n_ / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::hypot(out_[k][0], out_[k][1]);
  }

 private:
  std::size_t n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

}  // namespace

Tensor extract_logmel(const AudioBuffer& audio, const LogMelOptions& opts) {
  if (audio.samples.empty()) throw DataError("log-mel: empty audio");
  if (audio.channels != 1) {
    throw DataError("log-mel: expected mono audio, got " + std::to_string(audio.channels) +
                    " channels");
  }
  if (audio.sample_rate < 16000.0) {
    throw DataError("log-mel: sample rate must be at least 16 kHz");
  }
  const FrameLayout layout = frame_layout(audio.sample_rate, opts);
  const std::size_t frames = frame_count(audio.samples.size(), layout);
  if (frames == 0) throw DataError("log-mel: audio shorter than one analysis window");
  const Tensor fb = mel_filterbank(opts.bands, layout.fft_size, audio.sample_rate);
  const std::size_t bins = layout.fft_size / 2 + 1;
  const auto window = hamming(layout.window);
  const double floor_log = std::log(opts.log_floor);

  RealFft fft(layout.fft_size);
  std::vector<double> mag;
  Tensor out({frames, opts.bands});
  for (std::size_t t = 0; t < frames; ++t) {
    double* in = fft.input();
    const double* src = audio.samples.data() + t * layout.hop;
    for (std::size_t i = 0; i < layout.window; ++i) in[i] = src[i] * window[i];
    std::fill(in + layout.window, in + layout.fft_size, 0.0);
    fft.magnitude(mag);
    for (std::size_t m = 0; m < opts.bands; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) e += fb[m * bins + k] * mag[k];
      out[t * opts.bands + m] = e > opts.log_floor ? std::log(e) : floor_log;
    }
  }
  return out;
}

// --- Annotations -----------------------------------------------------------

std::vector<EventAnnotation> read_annotations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open annotation file " + path.string());
  std::vector<EventAnnotation> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    EventAnnotation e;
    if (!(ss >> e.onset)) continue;
    if (!(ss >> e.offset >> e.label) || e.offset < e.onset || e.onset < 0.0) {
      throw DataError("annotation file " + path.string() + ":" + std::to_string(lineno) +
                      ": expected 'onset offset label' with onset <= offset");
    }
    events.push_back(std::move(e));
  }
  return events;
}

Tensor frame_labels(std::span<const EventAnnotation> events,
                    std::span<const std::string> class_names, std::size_t frames,
                    const FrameLayout& layout, double sample_rate) {
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < class_names.size(); ++c) index[class_names[c]] = c;
  const std::size_t classes = class_names.size();
  Tensor y({frames, classes});
  for (const auto& e : events) {
    const auto it = index.find(e.label);
    if (it == index.end()) throw DataError("annotation: unknown class '" + e.label + "'");
    for (std::size_t t = 0; t < frames; ++t) {
      const double center =
          (static_cast<double>(t * layout.hop) + static_cast<double>(layout.window) / 2.0) /
          sample_rate;
      if (center >= e.onset && center < e.offset) y[t * classes + it->second] = 1.0;
    }
  }
  return y;
}

}  // namespace dlc
