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

// Reference implementations written independently of the engine. They favour
// the most literal reading of each definition over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "dlc/metrics.hpp"
#include "dlc/tensor.hpp"

namespace oracle {

using dlc::Tensor;

// out[o,y,x] = sum_{c,i,j} in[c, y + i*dh - top, x + j*dw - left] * k[o,c,i,j]
inline Tensor conv2d(const Tensor& in, const Tensor& k, std::size_t dh, std::size_t dw,
                     std::size_t top, std::size_t bottom, std::size_t left, std::size_t right) {
  const long cin = static_cast<long>(in.dim(0)), h = static_cast<long>(in.dim(1)),
             w = static_cast<long>(in.dim(2));
  const long cout = static_cast<long>(k.dim(0)), kh = static_cast<long>(k.dim(2)),
             kw = static_cast<long>(k.dim(3));
  const long ho = h + static_cast<long>(top + bottom) - static_cast<long>(dh) * (kh - 1);
  const long wo = w + static_cast<long>(left + right) - static_cast<long>(dw) * (kw - 1);
  Tensor out({static_cast<std::size_t>(cout), static_cast<std::size_t>(ho),
              static_cast<std::size_t>(wo)});
  for (long o = 0; o < cout; ++o) {
    for (long y = 0; y < ho; ++y) {
      for (long x = 0; x < wo; ++x) {
        double acc = 0.0;
        for (long c = 0; c < cin; ++c) {
          for (long i = 0; i < kh; ++i) {
            for (long j = 0; j < kw; ++j) {
              const long iy = y + i * static_cast<long>(dh) - static_cast<long>(top);
              const long ix = x + j * static_cast<long>(dw) - static_cast<long>(left);
              if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
              acc += in[(c * h + iy) * w + ix] * k[((o * cin + c) * kh + i) * kw + j];
            }
          }
        }
        out[(o * ho + y) * wo + x] = acc;
      }
    }
  }
  return out;
}

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t q = 0; q < k; ++q) acc += a[i * k + q] * b[q * n + j];
      out[i * n + j] = acc;
    }
  }
  return out;
}

// Per-frame tally of the frame-based counts.
inline dlc::FrameCounts tally(const Tensor& pred, const Tensor& labels, double threshold,
                              std::size_t frames) {
  const std::size_t c = pred.dim(1);
  dlc::FrameCounts k;
  for (std::size_t t = 0; t < frames; ++t) {
    std::uint64_t fn = 0, fp = 0;
    for (std::size_t j = 0; j < c; ++j) {
      const bool p = pred[t * c + j] >= threshold;
      const bool y = labels[t * c + j] == 1.0;
      if (p && y) ++k.tp;
      if (p && !y) ++fp;
      if (!p && y) ++fn;
      if (y) ++k.n_ref;
    }
    k.fp += fp;
    k.fn += fn;
    k.s += std::min(fn, fp);
    k.d += fn > fp ? fn - fp : 0;
    k.i += fp > fn ? fp - fn : 0;
  }
  return k;
}

// Bias-corrected Adam on one scalar.
struct ScalarAdam {
  double lr = 1e-3, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0;
  int t = 0;

  double step(double x, double g) {
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mh = m / (1.0 - std::pow(b1, t));
    const double vh = v / (1.0 - std::pow(b2, t));
    return x - lr * mh / (std::sqrt(vh) + eps);
  }
};

// Copy of the elements; safe to iterate when `t` is a temporary.
inline std::vector<double> values_of(const Tensor& t) {
  return {t.values().begin(), t.values().end()};
}

inline Tensor random_tensor(dlc::Shape shape, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> u(lo, hi);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline Tensor random_binary(dlc::Shape shape, std::mt19937_64& rng, double p = 0.3) {
  Tensor t(std::move(shape));
  std::bernoulli_distribution b(p);
  for (double& v : t.values()) v = b(rng) ? 1.0 : 0.0;
  return t;
}

}  // namespace oracle
