// Copyright 2026 The ivfusion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Minimal convolution/linear primitives shared by the fusion modules.
// All temporal and spatial padding is replicate. Weights live in plain
// vectors; each init(Rng&) draws weights then bias in index order, so a
// given seed reproduces parameters bitwise.

#pragma once

#include <cmath>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/error.hpp"
#include "ivf/rng.hpp"
#include "ivf/video_core.hpp"

namespace ivf {

inline float sigmoidf(float x) {
  return static_cast<float>(1.0 / (1.0 + std::exp(-static_cast<double>(x))));
}

inline float reluf(float x) { return x > 0.f ? x : 0.f; }

// Per-channel temporal convolution on a T×C grid, kernel size k, replicate
// temporal padding.
struct DepthwiseTemporalConv {
  int c = 0;
  int k = 3;
  std::vector<float> w;     // c*k
  std::vector<float> bias;  // c

  DepthwiseTemporalConv() = default;
  DepthwiseTemporalConv(int channels, int kernel) : c(channels), k(kernel) {
    w.assign(static_cast<std::size_t>(c) * k, 0.f);
    bias.assign(static_cast<std::size_t>(c), 0.f);
  }

  void init(Rng& rng, float lo = -0.1f, float hi = 0.1f) {
    for (auto& x : w) x = static_cast<float>(rng.uniform(lo, hi));
    for (auto& x : bias) x = static_cast<float>(rng.uniform(lo, hi));
  }

  TcGrid apply(const TcGrid& in) const {
    if (in.c != c) {
      throw DimensionError("temporal conv expects C=" + std::to_string(c) +
                           ", got C=" + std::to_string(in.c));
    }
    TcGrid out(in.t, in.c);
    const int r = k / 2;
    for (int t = 0; t < in.t; ++t) {
      for (int ci = 0; ci < in.c; ++ci) {
        double acc = bias[static_cast<std::size_t>(ci)];
        for (int dt = -r; dt <= r; ++dt) {
          const int st = clamp_index(t + dt, in.t);
          acc += static_cast<double>(w[static_cast<std::size_t>(ci) * k + (dt + r)]) *
                 in.at(st, ci);
        }
        out.at(t, ci) = static_cast<float>(acc);
      }
    }
    return out;
  }
};

// Dense linear map applied at every time step (T×Cin -> T×Cout) or at every
// voxel of a clip (1×1×1 convolution, C_in -> C_out).
struct PointwiseMap {
  int in_c = 0;
  int out_c = 0;
  std::vector<float> w;     // out_c*in_c, row-major
  std::vector<float> bias;  // out_c

  PointwiseMap() = default;
  PointwiseMap(int in_channels, int out_channels) : in_c(in_channels), out_c(out_channels) {
    w.assign(static_cast<std::size_t>(out_c) * in_c, 0.f);
    bias.assign(static_cast<std::size_t>(out_c), 0.f);
  }

  void init(Rng& rng, float lo = -0.1f, float hi = 0.1f) {
    for (auto& x : w) x = static_cast<float>(rng.uniform(lo, hi));
    for (auto& x : bias) x = static_cast<float>(rng.uniform(lo, hi));
  }

  TcGrid apply(const TcGrid& in) const {
    if (in.c != in_c) {
      throw DimensionError("pointwise map expects C=" + std::to_string(in_c) +
                           ", got C=" + std::to_string(in.c));
    }
    TcGrid out(in.t, out_c);
    for (int t = 0; t < in.t; ++t) {
      for (int o = 0; o < out_c; ++o) {
        double acc = bias[static_cast<std::size_t>(o)];
        for (int i = 0; i < in_c; ++i) {
          acc += static_cast<double>(w[static_cast<std::size_t>(o) * in_c + i]) * in.at(t, i);
        }
        out.at(t, o) = static_cast<float>(acc);
      }
    }
    return out;
  }

  Clip apply(const Clip& in) const {
    if (in.c() != in_c) {
      throw DimensionError("pointwise conv expects C=" + std::to_string(in_c) +
                           ", got C=" + std::to_string(in.c()));
    }
    Clip out(in.t(), out_c, in.h(), in.w());
    const std::size_t n = static_cast<std::size_t>(in.h()) * in.w();
    for (int t = 0; t < in.t(); ++t) {
      for (int o = 0; o < out_c; ++o) {
        float* dst = out.plane_data(t, o);
        for (std::size_t i = 0; i < n; ++i) dst[i] = bias[static_cast<std::size_t>(o)];
        for (int ci = 0; ci < in_c; ++ci) {
          const float wv = w[static_cast<std::size_t>(o) * in_c + ci];
          const float* src = in.plane_data(t, ci);
          for (std::size_t i = 0; i < n; ++i) dst[i] += wv * src[i];
        }
      }
    }
    return out;
  }
};

// Per-channel kt×kh×kw spatio-temporal convolution with replicate padding on
// all axes and optional spatial dilation.
struct DepthwiseConv3d {
  int c = 0;
  int kt = 3, kh = 3, kw = 3;
  int dil_h = 1, dil_w = 1;
  std::vector<float> w;     // c*kt*kh*kw
  std::vector<float> bias;  // c

  DepthwiseConv3d() = default;
  DepthwiseConv3d(int channels, int kt_, int kh_, int kw_, int dh = 1, int dw = 1)
      : c(channels), kt(kt_), kh(kh_), kw(kw_), dil_h(dh), dil_w(dw) {
    w.assign(static_cast<std::size_t>(c) * kt * kh * kw, 0.f);
    bias.assign(static_cast<std::size_t>(c), 0.f);
  }

  void init(Rng& rng, float lo = -0.1f, float hi = 0.1f) {
    for (auto& x : w) x = static_cast<float>(rng.uniform(lo, hi));
    for (auto& x : bias) x = static_cast<float>(rng.uniform(lo, hi));
  }

  Clip apply(const Clip& in) const {
    if (in.c() != c) {
      throw DimensionError("depthwise conv expects C=" + std::to_string(c) +
                           ", got C=" + std::to_string(in.c()));
    }
    Clip out(in.shape());
    const int rt = kt / 2, rh = kh / 2, rw = kw / 2;
    for (int t = 0; t < in.t(); ++t) {
      for (int ci = 0; ci < in.c(); ++ci) {
        const float* wc = &w[static_cast<std::size_t>(ci) * kt * kh * kw];
        for (int y = 0; y < in.h(); ++y) {
          for (int x = 0; x < in.w(); ++x) {
            double acc = bias[static_cast<std::size_t>(ci)];
            for (int dt = -rt; dt <= rt; ++dt) {
              const int st = clamp_index(t + dt, in.t());
              for (int dy = -rh; dy <= rh; ++dy) {
                const int sy = clamp_index(y + dy * dil_h, in.h());
                for (int dx = -rw; dx <= rw; ++dx) {
                  const int sx = clamp_index(x + dx * dil_w, in.w());
                  acc += static_cast<double>(
                             wc[(static_cast<std::size_t>(dt + rt) * kh + (dy + rh)) * kw +
                                (dx + rw)]) *
                         in.at(st, ci, sy, sx);
                }
              }
            }
            out.at(t, ci, y, x) = static_cast<float>(acc);
          }
        }
      }
    }
    return out;
  }
};

}  // namespace ivf
