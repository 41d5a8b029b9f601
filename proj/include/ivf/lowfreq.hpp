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

// Low-frequency branch: temporal perturbation enhancement of each modality
// (activity-gated temporal shifts plus a gated 3D enhancement residual,
// with the temporal mean restored at the output) and shared-context gated
// fusion of the two enhanced streams.
//
// Parameters are inference-only: seeded U(-0.1, 0.1) draws in documented
// member order, injection coefficients gamma0 start at zero and the global
// perturbation strength beta defaults to 0.5.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/conv.hpp"
#include "ivf/error.hpp"
#include "ivf/rng.hpp"
#include "ivf/video_core.hpp"

namespace ivf {

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

struct LfpmParams {
  int c = 0;
  float beta = 0.5f;
  int groups = 4;
  int max_shift = 1;
  double perturb_prob = 0.7;
  double hidden_ratio = 0.25;
  bool training_mode = true;

  DepthwiseTemporalConv gate_conv;   // activity -> shift gate logits
  DepthwiseTemporalConv gamma_gate;  // activity -> injection gate logits
  std::vector<float> gamma0;         // per-channel injection coefficients
  DepthwiseConv3d enhance_dw;        // 3x3x3 depthwise stage of E
  PointwiseMap enhance_pw1;          // C -> hidden
  PointwiseMap enhance_pw2;          // hidden -> C
  DepthwiseConv3d enhance_dilated;   // parallel 1x3x3, spatial dilation 2

  static int hidden_width(int channels, double ratio) {
    const int h = static_cast<int>(std::ceil(ratio * channels));
    return h < 1 ? 1 : h;
  }

  // All-zero parameters (and beta = 0), so the forward pass is an identity.
  static LfpmParams zeros(int channels) {
    LfpmParams p;
    p.c = channels;
    p.beta = 0.f;
    const int hidden = hidden_width(channels, p.hidden_ratio);
    p.gate_conv = DepthwiseTemporalConv(channels, 3);
    p.gamma_gate = DepthwiseTemporalConv(channels, 3);
    p.gamma0.assign(static_cast<std::size_t>(channels), 0.f);
    p.enhance_dw = DepthwiseConv3d(channels, 3, 3, 3);
    p.enhance_pw1 = PointwiseMap(channels, hidden);
    p.enhance_pw2 = PointwiseMap(hidden, channels);
    p.enhance_dilated = DepthwiseConv3d(channels, 1, 3, 3, 2, 2);
    return p;
  }

  // Seeded draws, in order: gate_conv, gamma_gate, enhance_dw, enhance_pw1,
  // enhance_pw2, enhance_dilated (weights before bias within each).
  static LfpmParams seeded(int channels, std::uint64_t seed) {
    LfpmParams p = zeros(channels);
    p.beta = 0.5f;
    Rng rng(seed);
    p.gate_conv.init(rng);
    p.gamma_gate.init(rng);
    p.enhance_dw.init(rng);
    p.enhance_pw1.init(rng);
    p.enhance_pw2.init(rng);
    p.enhance_dilated.init(rng);
    return p;
  }
};

struct LtcmParams {
  int c = 0;
  DepthwiseTemporalConv mix_dw;  // 2C channels, temporal k=3
  PointwiseMap mix_pw;           // 2C -> 2C
  PointwiseMap gate_ir;          // 2C -> C
  PointwiseMap gate_vi;          // 2C -> C
  PointwiseMap fuse_gate;        // 2C -> C, applied per voxel

  static LtcmParams zeros(int channels) {
    LtcmParams p;
    p.c = channels;
    p.mix_dw = DepthwiseTemporalConv(2 * channels, 3);
    p.mix_pw = PointwiseMap(2 * channels, 2 * channels);
    p.gate_ir = PointwiseMap(2 * channels, channels);
    p.gate_vi = PointwiseMap(2 * channels, channels);
    p.fuse_gate = PointwiseMap(2 * channels, channels);
    return p;
  }

  // Seeded draws, in order: mix_dw, mix_pw, gate_ir, gate_vi, fuse_gate.
  static LtcmParams seeded(int channels, std::uint64_t seed) {
    LtcmParams p = zeros(channels);
    Rng rng(seed);
    p.mix_dw.init(rng);
    p.mix_pw.init(rng);
    p.gate_ir.init(rng);
    p.gate_vi.init(rng);
    p.fuse_gate.init(rng);
    return p;
  }
};

// ---------------------------------------------------------------------------
// Temporal activity
// ---------------------------------------------------------------------------

// Per-frame, per-channel activity: absolute differences of the spatially
// pooled signal, averaged over the two neighbors at interior frames.
inline TcGrid temporal_activity(const Clip& low) {
  if (low.t() < 2) {
    throw InsufficientFramesError("temporal_activity needs T >= 2, got T=" +
                                  std::to_string(low.t()));
  }
  const TcGrid z = spatial_mean_pool(low);
  TcGrid delta(z.t, z.c);
  for (int c = 0; c < z.c; ++c) {
    for (int t = 0; t < z.t; ++t) {
      const auto diff = [&](int a, int b) {
        return std::fabs(static_cast<double>(z.at(a, c)) - z.at(b, c));
      };
      double d;
      if (t == 0) {
        d = diff(1, 0);
      } else if (t == z.t - 1) {
        d = diff(t, t - 1);
      } else {
        d = 0.5 * (diff(t, t - 1) + diff(t + 1, t));
      }
      delta.at(t, c) = static_cast<float>(d);
    }
  }
  return delta;
}

// ---------------------------------------------------------------------------
// Grouped temporal shift
// ---------------------------------------------------------------------------

struct ShiftPlan {
  std::vector<int> group_shift;  // effective shift per group (0 if gated off)
};

// Channel ranges per group: C/g channels each, remainder joins the last.
inline std::vector<std::pair<int, int>> group_channel_ranges(int channels, int groups) {
  std::vector<std::pair<int, int>> ranges;
  const int base = channels / groups;
  int start = 0;
  for (int g = 0; g < groups; ++g) {
    const int end = (g == groups - 1) ? channels : start + base;
    ranges.emplace_back(start, end);
    start = end;
  }
  return ranges;
}

// Shift magnitudes are drawn per group pair and assigned with opposite signs
// (+s to the even group, -s to its partner); an odd trailing group draws
// freely. Each group then independently keeps or drops its shift with
// probability perturb_prob.
inline ShiftPlan make_shift_plan(const LfpmParams& params, Rng& rng) {
  ShiftPlan plan;
  plan.group_shift.assign(static_cast<std::size_t>(params.groups), 0);
  for (int g = 0; g + 1 < params.groups; g += 2) {
    const int s = static_cast<int>(rng.uniform_int(-params.max_shift, params.max_shift));
    plan.group_shift[static_cast<std::size_t>(g)] = s;
    plan.group_shift[static_cast<std::size_t>(g + 1)] = -s;
  }
  if (params.groups % 2 == 1) {
    plan.group_shift.back() =
        static_cast<int>(rng.uniform_int(-params.max_shift, params.max_shift));
  }
  for (auto& s : plan.group_shift) {
    if (!(rng.uniform01() < params.perturb_prob)) s = 0;
  }
  return plan;
}

// Non-circular temporal shift: output frame t of a group shifted by s reads
// input frame clamp(t - s), replicating the boundary frame.
inline Clip apply_shift_plan(const Clip& low, const ShiftPlan& plan, int groups) {
  const auto ranges = group_channel_ranges(low.c(), groups);
  Clip out(low.shape());
  for (std::size_t g = 0; g < ranges.size(); ++g) {
    const int s = plan.group_shift[g];
    for (int c = ranges[g].first; c < ranges[g].second; ++c) {
      for (int t = 0; t < low.t(); ++t) {
        out.copy_plane(t, c, low, clamp_index(t - s, low.t()), c);
      }
    }
  }
  return out;
}

inline Clip temporal_shift(const Clip& low, const LfpmParams& params,
                           std::uint64_t rng_seed) {
  if (!params.training_mode || params.max_shift == 0) return low;
  Rng rng(mix_seed(rng_seed, 0x7368696674706c6eULL));
  const ShiftPlan plan = make_shift_plan(params, rng);
  return apply_shift_plan(low, plan, params.groups);
}

// ---------------------------------------------------------------------------
// LFPM forward
// ---------------------------------------------------------------------------

struct LfpmTrace {
  TcGrid delta;  // temporal activity
  TcGrid gate;   // sigmoid shift gate G
  Clip lp;       // perturbed features L^p
  Clip lhat;     // output
};

namespace detail {

inline Clip enhance(const Clip& x, const LfpmParams& p) {
  Clip mixed = p.enhance_pw1.apply(p.enhance_dw.apply(x));
  for (float& v : mixed.raw()) v = reluf(v);
  Clip out = p.enhance_pw2.apply(mixed);
  const Clip dil = p.enhance_dilated.apply(x);
  float* dst = out.raw().data();
  const float* add = dil.raw().data();
  for (std::size_t i = 0; i < out.shape().elements(); ++i) dst[i] += add[i];
  return out;
}

}  // namespace detail

// Activity-gated temporal perturbation, gated 3D enhancement, and temporal
// mean restoration, in that order. The per-channel per-pixel temporal mean
// of the output equals that of the input.
inline Clip lfpm_forward(const Clip& low, const LfpmParams& params,
                         std::uint64_t rng_seed, LfpmTrace* trace = nullptr) {
  if (low.c() != params.c) {
    throw DimensionError("lfpm params built for C=" + std::to_string(params.c) +
                         ", input has C=" + std::to_string(low.c()));
  }
  if (low.h() < 3 || low.w() < 3) {
    throw DimensionError("lfpm_forward needs H,W >= 3, got " + low.shape().str());
  }
  const TcGrid delta = temporal_activity(low);

  TcGrid gate = params.gate_conv.apply(delta);
  for (float& v : gate.v) v = sigmoidf(v);

  const Clip shifted = temporal_shift(low, params, rng_seed);

  Clip lp(low.shape());
  for (int t = 0; t < low.t(); ++t) {
    for (int c = 0; c < low.c(); ++c) {
      const float g = params.beta * gate.at(t, c);
      const float* a = low.plane_data(t, c);
      const float* b = shifted.plane_data(t, c);
      float* dst = lp.plane_data(t, c);
      const std::size_t n = static_cast<std::size_t>(low.h()) * low.w();
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = a[i] + g * (b[i] - a[i]);
      }
    }
  }

  TcGrid inj_gate = params.gamma_gate.apply(delta);
  for (float& v : inj_gate.v) v = sigmoidf(v);

  const Clip enhanced = detail::enhance(lp, params);
  Clip ltilde(low.shape());
  for (int t = 0; t < low.t(); ++t) {
    for (int c = 0; c < low.c(); ++c) {
      const float gamma = params.gamma0[static_cast<std::size_t>(c)] * inj_gate.at(t, c);
      const float* a = lp.plane_data(t, c);
      const float* e = enhanced.plane_data(t, c);
      float* dst = ltilde.plane_data(t, c);
      const std::size_t n = static_cast<std::size_t>(low.h()) * low.w();
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = a[i] + gamma * e[i];
      }
    }
  }

  // Restore the per-channel per-pixel temporal mean of the input.
  Clip out(low.shape());
  const std::size_t n = static_cast<std::size_t>(low.h()) * low.w();
  std::vector<double> mean_shift(n);
  for (int c = 0; c < low.c(); ++c) {
    std::fill(mean_shift.begin(), mean_shift.end(), 0.0);
    for (int t = 0; t < low.t(); ++t) {
      const float* orig = low.plane_data(t, c);
      const float* tld = ltilde.plane_data(t, c);
      for (std::size_t i = 0; i < n; ++i) {
        mean_shift[i] += static_cast<double>(orig[i]) - tld[i];
      }
    }
    for (double& v : mean_shift) v /= low.t();
    for (int t = 0; t < low.t(); ++t) {
      const float* tld = ltilde.plane_data(t, c);
      float* dst = out.plane_data(t, c);
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = static_cast<float>(tld[i] + mean_shift[i]);
      }
    }
  }

  if (trace) {
    trace->delta = delta;
    trace->gate = gate;
    trace->lp = lp;
    trace->lhat = out;
  }
  return out;
}

// ---------------------------------------------------------------------------
// LTCM fusion
// ---------------------------------------------------------------------------

struct LtcmTrace {
  TcGrid zs;  // shared temporal context (T x 2C)
};

// Shared temporal context from both pooled streams, per-modality modulation
// in (1,2), then a per-voxel convex gate over the two modulated branches.
inline Clip ltcm_fuse(const Clip& low_ir, const Clip& low_vi, const LtcmParams& params,
                      LtcmTrace* trace = nullptr) {
  require_same_shape(low_ir, low_vi, "ltcm_fuse ir vs vi");
  if (low_ir.c() != params.c) {
    throw DimensionError("ltcm params built for C=" + std::to_string(params.c) +
                         ", input has C=" + std::to_string(low_ir.c()));
  }
  const int t_n = low_ir.t(), c_n = low_ir.c();

  const TcGrid z_ir = spatial_mean_pool(low_ir);
  const TcGrid z_vi = spatial_mean_pool(low_vi);
  TcGrid z(t_n, 2 * c_n);
  for (int t = 0; t < t_n; ++t) {
    for (int c = 0; c < c_n; ++c) {
      z.at(t, c) = z_ir.at(t, c);
      z.at(t, c_n + c) = z_vi.at(t, c);
    }
  }
  const TcGrid zs = params.mix_pw.apply(params.mix_dw.apply(z));
  if (trace) trace->zs = zs;

  TcGrid m_ir = params.gate_ir.apply(zs);
  TcGrid m_vi = params.gate_vi.apply(zs);
  for (float& v : m_ir.v) v = 1.f + sigmoidf(v);
  for (float& v : m_vi.v) v = 1.f + sigmoidf(v);

  Clip mod_ir(low_ir.shape()), mod_vi(low_ir.shape());
  const std::size_t n = static_cast<std::size_t>(low_ir.h()) * low_ir.w();
  for (int t = 0; t < t_n; ++t) {
    for (int c = 0; c < c_n; ++c) {
      const float fi = m_ir.at(t, c), fv = m_vi.at(t, c);
      const float* si = low_ir.plane_data(t, c);
      const float* sv = low_vi.plane_data(t, c);
      float* di = mod_ir.plane_data(t, c);
      float* dv = mod_vi.plane_data(t, c);
      for (std::size_t i = 0; i < n; ++i) {
        di[i] = fi * si[i];
        dv[i] = fv * sv[i];
      }
    }
  }

  // Per-voxel gate from the concatenated modulated features.
  Clip cat(t_n, 2 * c_n, low_ir.h(), low_ir.w());
  for (int t = 0; t < t_n; ++t) {
    for (int c = 0; c < c_n; ++c) {
      cat.copy_plane(t, c, mod_ir, t, c);
      cat.copy_plane(t, c_n + c, mod_vi, t, c);
    }
  }
  Clip gate = params.fuse_gate.apply(cat);
  for (float& v : gate.raw()) v = sigmoidf(v);

  Clip out(low_ir.shape());
  for (int t = 0; t < t_n; ++t) {
    for (int c = 0; c < c_n; ++c) {
      const float* g = gate.plane_data(t, c);
      const float* a = mod_ir.plane_data(t, c);
      const float* b = mod_vi.plane_data(t, c);
      float* dst = out.plane_data(t, c);
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = g[i] * a[i] + (1.f - g[i]) * b[i];
      }
    }
  }
  return out;
}

}  // namespace ivf
