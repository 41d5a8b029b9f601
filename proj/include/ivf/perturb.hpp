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

// Seeded clip perturbations. Six families, each parameterized by one scalar
// strength; strength 0 is a bitwise identity for every family. Draws are
// logged so tests can invert (or replay) the corruption.
//
// Family internals:
//   flicker            per-frame gain 1 + 0.1*strength*u_t, u_t ~ U(-1,1),
//                      output clamped to [0, 1.5]
//   jitter             per-frame global sub-pixel translation, magnitude
//                      strength*U(0,1), direction U(0, 2*pi), bilinear warp
//   local_misalignment smooth displacement field (noise blurred with
//                      sigma=8px), scaled so its peak magnitude over the
//                      whole clip equals `strength` pixels, rotating once
//                      between two fields across the clip
//   modality_drift     re-blends the fused clip from its sources with a
//                      time-growing infrared weight 0.5 + 0.1*strength*t/T
//                      (clamped to [0,1]); requires ir and vi clips
//   temporal_shuffle   frames permuted within non-overlapping windows of
//                      length min(T, 2 + round(strength))
//   mixed_hard         jitter(0.4s) after flicker(0.8s) after
//                      local_misalignment(0.6s), plus Gaussian noise of
//                      std 0.01s, clamped to [0, 1.5]

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/error.hpp"
#include "ivf/rng.hpp"
#include "ivf/video_core.hpp"

namespace ivf {

enum class PerturbFamily {
  kFlicker,
  kJitter,
  kLocalMisalignment,
  kModalityDrift,
  kTemporalShuffle,
  kMixedHard,
};

inline const char* family_name(PerturbFamily f) {
  switch (f) {
    case PerturbFamily::kFlicker: return "flicker";
    case PerturbFamily::kJitter: return "jitter";
    case PerturbFamily::kLocalMisalignment: return "local_misalignment";
    case PerturbFamily::kModalityDrift: return "modality_drift";
    case PerturbFamily::kTemporalShuffle: return "temporal_shuffle";
    case PerturbFamily::kMixedHard: return "mixed_hard";
  }
  return "?";
}

inline PerturbFamily family_from_string(const std::string& s) {
  if (s == "flicker") return PerturbFamily::kFlicker;
  if (s == "jitter") return PerturbFamily::kJitter;
  if (s == "local_misalignment") return PerturbFamily::kLocalMisalignment;
  if (s == "modality_drift") return PerturbFamily::kModalityDrift;
  if (s == "temporal_shuffle") return PerturbFamily::kTemporalShuffle;
  if (s == "mixed_hard") return PerturbFamily::kMixedHard;
  throw ParameterError("unknown perturbation family: " + s);
}

struct PerturbSpec {
  PerturbFamily family = PerturbFamily::kFlicker;
  double strength = 0.0;
  std::uint64_t seed = 0;
};

struct PerturbLog {
  std::vector<double> gains;                         // flicker, per frame
  std::vector<std::array<double, 2>> jitter_shifts;  // per frame (u,v)
  std::vector<int> permutation;    // shuffle: output t reads input permutation[t]
  std::vector<double> drift_alpha; // drift: per-frame infrared weight
  double misalign_peak = 0.0;      // realized peak displacement, pixels
};

namespace detail {

// Seed-stream tags, one per draw consumer.
inline constexpr std::uint64_t kTagFlicker = 0x666c69636b657231ULL;
inline constexpr std::uint64_t kTagJitter = 0x6a69747465723131ULL;
inline constexpr std::uint64_t kTagMisalign = 0x6d6973616c696731ULL;
inline constexpr std::uint64_t kTagShuffle = 0x73687566666c6531ULL;
inline constexpr std::uint64_t kTagNoise = 0x6e6f697365313131ULL;

inline void clamp_values(Clip& clip, float lo, float hi) {
  for (float& v : clip.raw()) {
    if (v < lo) v = lo;
    if (v > hi) v = hi;
  }
}

// Separable Gaussian smoothing with replicate padding; used only to shape
// the misalignment displacement field, so the exact border treatment is not
// contract-bearing.
inline Plane smooth_field(const Plane& in, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * r + 1));
  double total = 0.0;
  for (int d = -r; d <= r; ++d) {
    const double v = std::exp(-(d * d) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(d + r)] = v;
    total += v;
  }
  for (double& v : taps) v /= total;

  Plane tmp(in.h, in.w), out(in.h, in.w);
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) {
        acc += taps[static_cast<std::size_t>(d + r)] * in.at(y, clamp_index(x + d, in.w));
      }
      tmp.at(y, x) = static_cast<float>(acc);
    }
  }
  for (int y = 0; y < in.h; ++y) {
    for (int x = 0; x < in.w; ++x) {
      double acc = 0.0;
      for (int d = -r; d <= r; ++d) {
        acc += taps[static_cast<std::size_t>(d + r)] * tmp.at(clamp_index(y + d, in.h), x);
      }
      out.at(y, x) = static_cast<float>(acc);
    }
  }
  return out;
}

// Per-pixel bilinear warp: out(y,x) samples in(y - v(y,x), x - u(y,x)),
// coordinates clamped to the frame.
inline Plane warp_field(PlaneRef f, const Plane& u, const Plane& v) {
  Plane out(f.h, f.w);
  for (int y = 0; y < f.h; ++y) {
    for (int x = 0; x < f.w; ++x) {
      double sy = static_cast<double>(y) - v.at(y, x);
      double sx = static_cast<double>(x) - u.at(y, x);
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

inline Clip apply_flicker(const Clip& clip, double strength, std::uint64_t seed,
                          PerturbLog* log) {
  Rng rng(mix_seed(seed, kTagFlicker));
  Clip out(clip.shape());
  for (int t = 0; t < clip.t(); ++t) {
    const double u = rng.uniform(-1.0, 1.0);
    const double g = 1.0 + 0.1 * strength * u;
    if (log) log->gains.push_back(g);
    for (int c = 0; c < clip.c(); ++c) {
      const float* src = clip.plane_data(t, c);
      float* dst = out.plane_data(t, c);
      const std::size_t n = static_cast<std::size_t>(clip.h()) * clip.w();
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = static_cast<float>(g * src[i]);
      }
    }
  }
  clamp_values(out, 0.f, 1.5f);
  return out;
}

inline Clip apply_jitter(const Clip& clip, double strength, std::uint64_t seed,
                         PerturbLog* log) {
  Rng rng(mix_seed(seed, kTagJitter));
  Clip out(clip.shape());
  for (int t = 0; t < clip.t(); ++t) {
    const double m = strength * rng.uniform01();
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double u = m * std::cos(theta);
    const double v = m * std::sin(theta);
    if (log) log->jitter_shifts.push_back({u, v});
    for (int c = 0; c < clip.c(); ++c) {
      out.set_plane(t, c, warp_bilinear(clip.plane(t, c), u, v));
    }
  }
  return out;
}

inline Clip apply_local_misalignment(const Clip& clip, double strength,
                                     std::uint64_t seed, PerturbLog* log) {
  Rng rng(mix_seed(seed, kTagMisalign));
  const int h = clip.h(), w = clip.w(), t_n = clip.t();

  // Two independent smoothed (u,v) fields; the applied field rotates through
  // one full turn across the clip, so the warp varies smoothly from frame to
  // frame and returns to its start.
  std::array<Plane, 4> fields;  // ua, va, ub, vb
  for (auto& f : fields) {
    Plane noise(h, w);
    for (float& x : noise.v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
    f = smooth_field(noise, 8.0);
  }

  double peak = 0.0;
  std::vector<double> phase(static_cast<std::size_t>(t_n), 0.0);
  for (int t = 0; t < t_n; ++t) {
    phase[static_cast<std::size_t>(t)] =
        t_n > 1 ? 2.0 * std::numbers::pi * t / (t_n - 1) : 0.0;
  }
  for (int t = 0; t < t_n; ++t) {
    const double ca = std::cos(phase[static_cast<std::size_t>(t)]);
    const double cb = std::sin(phase[static_cast<std::size_t>(t)]);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const double u = ca * fields[0].at(y, x) + cb * fields[2].at(y, x);
        const double v = ca * fields[1].at(y, x) + cb * fields[3].at(y, x);
        const double mag = std::sqrt(u * u + v * v);
        if (mag > peak) peak = mag;
      }
    }
  }
  const double scale = peak > 0.0 ? strength / peak : 0.0;
  if (log) log->misalign_peak = peak * scale;

  Clip out(clip.shape());
  Plane u_t(h, w), v_t(h, w);
  for (int t = 0; t < t_n; ++t) {
    const double ca = scale * std::cos(phase[static_cast<std::size_t>(t)]);
    const double cb = scale * std::sin(phase[static_cast<std::size_t>(t)]);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        u_t.at(y, x) = static_cast<float>(ca * fields[0].at(y, x) + cb * fields[2].at(y, x));
        v_t.at(y, x) = static_cast<float>(ca * fields[1].at(y, x) + cb * fields[3].at(y, x));
      }
    }
    for (int c = 0; c < clip.c(); ++c) {
      out.set_plane(t, c, warp_field(clip.plane(t, c), u_t, v_t));
    }
  }
  return out;
}

inline Clip apply_modality_drift(const Clip& clip, double strength, const Clip* ir,
                                 const Clip* vi, PerturbLog* log) {
  if (ir == nullptr || vi == nullptr) {
    throw MissingInputError("modality_drift needs ir and vi source clips");
  }
  require_same_shape(clip, *ir, "modality_drift fused vs ir");
  require_same_shape(clip, *vi, "modality_drift fused vs vi");
  Clip out(clip.shape());
  for (int t = 0; t < clip.t(); ++t) {
    double a = 0.5 + 0.1 * strength * static_cast<double>(t) / clip.t();
    if (a < 0.0) a = 0.0;
    if (a > 1.0) a = 1.0;
    if (log) log->drift_alpha.push_back(a);
    for (int c = 0; c < clip.c(); ++c) {
      const float* pi = ir->plane_data(t, c);
      const float* pv = vi->plane_data(t, c);
      float* dst = out.plane_data(t, c);
      const std::size_t n = static_cast<std::size_t>(clip.h()) * clip.w();
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = static_cast<float>(a * pi[i] + (1.0 - a) * pv[i]);
      }
    }
  }
  return out;
}

inline Clip apply_temporal_shuffle(const Clip& clip, double strength,
                                   std::uint64_t seed, PerturbLog* log) {
  Rng rng(mix_seed(seed, kTagShuffle));
  const int t_n = clip.t();
  const int win = static_cast<int>(std::min<long>(t_n, 2 + std::lround(strength)));
  std::vector<int> perm(static_cast<std::size_t>(t_n));
  for (int t = 0; t < t_n; ++t) perm[static_cast<std::size_t>(t)] = t;
  for (int start = 0; start < t_n; start += win) {
    const int end = std::min(t_n, start + win);
    for (int i = end - 1; i > start; --i) {  // Fisher-Yates within the window
      const int j = start + static_cast<int>(rng.uniform_int(0, i - start));
      std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
  }
  if (log) log->permutation = perm;
  Clip out(clip.shape());
  for (int t = 0; t < t_n; ++t) {
    for (int c = 0; c < clip.c(); ++c) {
      out.copy_plane(t, c, clip, perm[static_cast<std::size_t>(t)], c);
    }
  }
  return out;
}

}  // namespace detail

// Applies one perturbation family. ir/vi are consulted only by
// modality_drift; log (optional) receives the drawn gains/shifts.
inline Clip apply_perturbation(const Clip& clip, const PerturbSpec& spec,
                               const Clip* ir = nullptr, const Clip* vi = nullptr,
                               PerturbLog* log = nullptr) {
  if (!(spec.strength >= 0.0)) {
    throw ParameterError("perturbation strength must be >= 0");
  }
  if (spec.strength == 0.0) return clip;

  switch (spec.family) {
    case PerturbFamily::kFlicker:
      return detail::apply_flicker(clip, spec.strength, spec.seed, log);
    case PerturbFamily::kJitter:
      return detail::apply_jitter(clip, spec.strength, spec.seed, log);
    case PerturbFamily::kLocalMisalignment:
      return detail::apply_local_misalignment(clip, spec.strength, spec.seed, log);
    case PerturbFamily::kModalityDrift:
      return detail::apply_modality_drift(clip, spec.strength, ir, vi, log);
    case PerturbFamily::kTemporalShuffle:
      return detail::apply_temporal_shuffle(clip, spec.strength, spec.seed, log);
    case PerturbFamily::kMixedHard: {
      Clip out = detail::apply_local_misalignment(clip, 0.6 * spec.strength,
                                                  spec.seed, log);
      out = detail::apply_flicker(out, 0.8 * spec.strength, spec.seed, log);
      out = detail::apply_jitter(out, 0.4 * spec.strength, spec.seed, log);
      Rng rng(mix_seed(spec.seed, detail::kTagNoise));
      const double std_dev = 0.01 * spec.strength;
      for (float& v : out.raw()) {
        v = static_cast<float>(v + std_dev * rng.gaussian());
      }
      detail::clamp_values(out, 0.f, 1.5f);
      return out;
    }
  }
  throw ParameterError("unknown perturbation family");
}

}  // namespace ivf
