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

// Shared numerical kernels for frame sequences. Boundary handling is fixed
// per operator and is part of each operator's contract:
//   - Gaussian blur, gradients, integer shift: replicate padding
//   - bilinear warp: border (replicate) via coordinate clamping
//   - average pooling (frequency decomposition): reflection padding,
//     mirror without repeating the edge pixel
// All reductions run in fixed order with double accumulators so results are
// identical across runs regardless of scheduling.

#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/error.hpp"

namespace ivf {

inline int clamp_index(int i, int n) {
  return i < 0 ? 0 : (i >= n ? n - 1 : i);
}

// Mirror without edge repeat: -1 -> 1, n -> n-2. Valid for |overhang| <= n-1.
inline int reflect_index(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return i;
}

// ---------------------------------------------------------------------------
// Color
// ---------------------------------------------------------------------------

// ITU-R BT.601 luma. C=1 clips pass through unchanged.
inline Clip to_grayscale(const Clip& clip) {
  if (clip.c() == 1) return clip;
  if (clip.c() != 3) {
    throw DimensionError("to_grayscale supports C in {1,3}, got C=" +
                         std::to_string(clip.c()));
  }
  Clip out(clip.t(), 1, clip.h(), clip.w());
  for (int t = 0; t < clip.t(); ++t) {
    const float* r = clip.plane_data(t, 0);
    const float* g = clip.plane_data(t, 1);
    const float* b = clip.plane_data(t, 2);
    float* y = out.plane_data(t, 0);
    const std::size_t n = static_cast<std::size_t>(clip.h()) * clip.w();
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<float>(0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernels and convolution
// ---------------------------------------------------------------------------

struct Kernel2D {
  int k = 0;                 // odd side length
  std::vector<double> taps;  // k*k, row-major

  double tap(int dy, int dx) const {
    const int r = k / 2;
    return taps[static_cast<std::size_t>(dy + r) * k + (dx + r)];
  }

  double sum() const {
    double s = 0.0;
    for (double v : taps) s += v;
    return s;
  }

  static Kernel2D gaussian(int k, double sigma) {
    if (k < 1 || k % 2 == 0) {
      throw ParameterError("Gaussian kernel size must be odd and positive, got " +
                           std::to_string(k));
    }
    if (!(sigma > 0.0)) {
      throw ParameterError("Gaussian sigma must be positive");
    }
    Kernel2D ker;
    ker.k = k;
    ker.taps.resize(static_cast<std::size_t>(k) * k);
    const int r = k / 2;
    double total = 0.0;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const double v = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
        ker.taps[static_cast<std::size_t>(dy + r) * k + (dx + r)] = v;
        total += v;
      }
    }
    for (double& v : ker.taps) v /= total;
    return ker;
  }
};

inline Plane convolve_replicate(PlaneRef f, const Kernel2D& ker) {
  Plane out(f.h, f.w);
  const int r = ker.k / 2;
  for (int y = 0; y < f.h; ++y) {
    for (int x = 0; x < f.w; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = clamp_index(y + dy, f.h);
        for (int dx = -r; dx <= r; ++dx) {
          const int sx = clamp_index(x + dx, f.w);
          acc += ker.tap(dy, dx) * f.at(sy, sx);
        }
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

inline Clip gaussian_blur(const Clip& clip, int k, double sigma) {
  const Kernel2D ker = Kernel2D::gaussian(k, sigma);
  Clip out(clip.shape());
  for (int t = 0; t < clip.t(); ++t) {
    for (int c = 0; c < clip.c(); ++c) {
      out.set_plane(t, c, convolve_replicate(clip.plane(t, c), ker));
    }
  }
  return out;
}

// Stride-1 k×k average pooling over a reflection-padded frame; output keeps
// the input size. Used by the frequency decomposition.
inline Plane avg_pool_reflect(PlaneRef f, int k) {
  Plane out(f.h, f.w);
  const int r = k / 2;
  const double inv = 1.0 / (static_cast<double>(k) * k);
  for (int y = 0; y < f.h; ++y) {
    for (int x = 0; x < f.w; ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy) {
        const int sy = reflect_index(y + dy, f.h);
        for (int dx = -r; dx <= r; ++dx) {
          const int sx = reflect_index(x + dx, f.w);
          acc += f.at(sy, sx);
        }
      }
      out.at(y, x) = static_cast<float>(acc * inv);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

enum class GradScheme { kCentral, kForward };

// Central differences use half-spacing scaling 0.5*(f[i+1]-f[i-1]); forward
// differences are plain f[i+1]-f[i]. Both replicate the boundary.
inline std::pair<Plane, Plane> spatial_gradients(PlaneRef f, GradScheme scheme) {
  if (f.h < 2 || f.w < 2) {
    throw DimensionError("spatial_gradients needs H,W >= 2");
  }
  Plane gx(f.h, f.w), gy(f.h, f.w);
  for (int y = 0; y < f.h; ++y) {
    for (int x = 0; x < f.w; ++x) {
      if (scheme == GradScheme::kCentral) {
        gx.at(y, x) = 0.5f * (f.at(y, clamp_index(x + 1, f.w)) -
                              f.at(y, clamp_index(x - 1, f.w)));
        gy.at(y, x) = 0.5f * (f.at(clamp_index(y + 1, f.h), x) -
                              f.at(clamp_index(y - 1, f.h), x));
      } else {
        gx.at(y, x) = f.at(y, clamp_index(x + 1, f.w)) - f.at(y, x);
        gy.at(y, x) = f.at(clamp_index(y + 1, f.h), x) - f.at(y, x);
      }
    }
  }
  return {std::move(gx), std::move(gy)};
}

// ---------------------------------------------------------------------------
// Warping and shifting
// ---------------------------------------------------------------------------

// Translates content by (+u,+v) pixels: out(y,x) samples in(y-v, x-u) with
// bilinear interpolation; out-of-range reads clamp to the border.
inline Plane warp_bilinear(PlaneRef f, double u, double v) {
  Plane out(f.h, f.w);
  for (int y = 0; y < f.h; ++y) {
    for (int x = 0; x < f.w; ++x) {
      double sy = static_cast<double>(y) - v;
      double sx = static_cast<double>(x) - u;
      if (sy < 0.0) sy = 0.0;
      if (sy > f.h - 1) sy = f.h - 1;
      if (sx < 0.0) sx = 0.0;
      if (sx > f.w - 1) sx = f.w - 1;
      const int y0 = static_cast<int>(std::floor(sy));
      const int x0 = static_cast<int>(std::floor(sx));
      const int y1 = clamp_index(y0 + 1, f.h);
      const int x1 = clamp_index(x0 + 1, f.w);
      const double fy = sy - y0;
      const double fx = sx - x0;
      const double top = (1.0 - fx) * f.at(y0, x0) + fx * f.at(y0, x1);
      const double bot = (1.0 - fx) * f.at(y1, x0) + fx * f.at(y1, x1);
      out.at(y, x) = static_cast<float>((1.0 - fy) * top + fy * bot);
    }
  }
  return out;
}

// Integer-shift counterpart of warp_bilinear: content moves by (+dx,+dy),
// replicate padding. Agrees with warp_bilinear at integer shifts.
inline Plane integer_shift(PlaneRef f, int dx, int dy) {
  Plane out(f.h, f.w);
  for (int y = 0; y < f.h; ++y) {
    const int sy = clamp_index(y - dy, f.h);
    for (int x = 0; x < f.w; ++x) {
      out.at(y, x) = f.at(sy, clamp_index(x - dx, f.w));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct PlaneStats {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

inline PlaneStats plane_stats(PlaneRef f) {
  const std::size_t n = static_cast<std::size_t>(f.h) * f.w;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += f.data[i];
  const double mean = s / static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = f.data[i] - mean;
    var += d * d;
  }
  return {mean, std::sqrt(var / static_cast<double>(n))};
}

// Centers each frame/channel plane by its mean and divides by (stddev + eps).
inline Clip normalize_frames(const Clip& clip, double eps = 1e-6) {
  Clip out(clip.shape());
  for (int t = 0; t < clip.t(); ++t) {
    for (int c = 0; c < clip.c(); ++c) {
      const PlaneRef p = clip.plane(t, c);
      const PlaneStats st = plane_stats(p);
      const double inv = 1.0 / (st.stddev + eps);
      float* dst = out.plane_data(t, c);
      const std::size_t n = static_cast<std::size_t>(p.h) * p.w;
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = static_cast<float>((p.data[i] - st.mean) * inv);
      }
    }
  }
  return out;
}

// Per-frame, per-channel scalar grid.
struct TcGrid {
  int t = 0;
  int c = 0;
  std::vector<float> v;

  TcGrid() = default;
  TcGrid(int t_, int c_, float fill = 0.f)
      : t(t_), c(c_), v(static_cast<std::size_t>(t_) * c_, fill) {}

  float& at(int ti, int ci) { return v[static_cast<std::size_t>(ti) * c + ci]; }
  float at(int ti, int ci) const {
    return v[static_cast<std::size_t>(ti) * c + ci];
  }
};

// Spatial mean of every frame/channel plane.
inline TcGrid spatial_mean_pool(const Clip& clip) {
  TcGrid z(clip.t(), clip.c());
  for (int t = 0; t < clip.t(); ++t) {
    for (int c = 0; c < clip.c(); ++c) {
      z.at(t, c) = static_cast<float>(plane_stats(clip.plane(t, c)).mean);
    }
  }
  return z;
}

// Box sum over the window intersected with the frame (truncated at borders).
inline Plane box_sum_truncated(PlaneRef f, int win) {
  if (win < 1 || win % 2 == 0) {
    throw ParameterError("box window must be odd and positive, got " +
                         std::to_string(win));
  }
  Plane out(f.h, f.w);
  const int r = win / 2;
  for (int y = 0; y < f.h; ++y) {
    const int y0 = std::max(0, y - r);
    const int y1 = std::min(f.h - 1, y + r);
    for (int x = 0; x < f.w; ++x) {
      const int x0 = std::max(0, x - r);
      const int x1 = std::min(f.w - 1, x + r);
      double acc = 0.0;
      for (int sy = y0; sy <= y1; ++sy) {
        for (int sx = x0; sx <= x1; ++sx) {
          acc += f.at(sy, sx);
        }
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

// Box mean over the truncated window (divides by the actual pixel count).
inline Plane box_mean_truncated(PlaneRef f, int win) {
  Plane out = box_sum_truncated(f, win);
  const int r = win / 2;
  for (int y = 0; y < f.h; ++y) {
    const int ny = std::min(f.h - 1, y + r) - std::max(0, y - r) + 1;
    for (int x = 0; x < f.w; ++x) {
      const int nx = std::min(f.w - 1, x + r) - std::max(0, x - r) + 1;
      out.at(y, x) = static_cast<float>(out.at(y, x) / (static_cast<double>(ny) * nx));
    }
  }
  return out;
}

}  // namespace ivf
