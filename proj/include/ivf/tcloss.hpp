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

// Offset-aware temporal consistency loss.
//
// Pipeline per clip: grayscale -> Gaussian blur (9x9, sigma 2) -> per-frame
// normalization. For every neighbor i of the center frame c = floor(T/2),
// a 25-candidate integer-shift Charbonnier cost map over [-2,2]^2 yields a
// soft sub-pixel shift (softmax at temperature tau, expectation over
// candidates) and an entropy confidence. The confidence-weighted reference
// shift supervises the fused shift (SmoothL1); aligned residuals on the
// unnormalized blurred frames give the alignment and gradient terms.
//
// Conventions: estimate_shift(frame_i, frame_c) returns the translation
// that moved the center frame's content to produce frame i, so candidate
// (u,v) scores frame_i sampled at (y+v, x+u) against frame_c, and the
// aligning warp W(X, delta) samples X at (y+v, x+u) (warp_bilinear with the
// negated shift).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/error.hpp"
#include "ivf/video_core.hpp"

namespace ivf {

struct TcConfig {
  int blur_k = 9;
  double blur_sigma = 2.0;
  int search_radius = 2;
  double charbonnier_eps = 1e-3;
  double softmax_temp = 0.15;
  double conf_gain = 8.0;
  double w_shift = 2.0;
  double w_align = 1.0;
  double w_grad = 0.3;
  double huber_delta = 1.0;
  double norm_eps = 1e-6;
  // Overrides the per-neighbor (w_vi, w_ir) confidence weights; diagnostic.
  std::optional<std::array<double, 2>> force_weights;
};

// Candidate order: v (rows) outer from -r to r, u inner from -r to r;
// index = (v+r)*(2r+1) + (u+r).
struct OffsetEstimate {
  double u = 0.0;
  double v = 0.0;
  std::vector<double> cost_map;
  std::vector<double> distribution;
  double confidence = 0.0;
};

struct TcNeighbor {
  int frame = 0;
  OffsetEstimate vi, ir, fused;
  double ref_u = 0.0, ref_v = 0.0;
  double w_vi = 0.5, w_ir = 0.5;
  double shift_err = 0.0;   // SmoothL1 term, mean over the two components
  double align_resid = 0.0; // mean Charbonnier of R^f - R^ref
  double grad_resid = 0.0;  // mean Charbonnier of its gradients, axis-avg
};

struct TcBreakdown {
  double l_shift = 0.0;
  double l_align = 0.0;
  double l_grad = 0.0;
  double total = 0.0;
  int center = 0;
  std::vector<TcNeighbor> per_neighbor;
};

// ---------------------------------------------------------------------------
// Projection
// ---------------------------------------------------------------------------

// Returns (L, Lbar): blurred grayscale frames and their per-frame
// normalization. Cost maps consume Lbar; residuals consume L.
inline std::pair<Clip, Clip> lowfreq_project(const Clip& clip, const TcConfig& cfg = {}) {
  if (clip.t() < 2) {
    throw InsufficientFramesError("lowfreq_project needs T >= 2, got T=" +
                                  std::to_string(clip.t()));
  }
  Clip l = gaussian_blur(to_grayscale(clip), cfg.blur_k, cfg.blur_sigma);
  Clip lbar = normalize_frames(l, cfg.norm_eps);
  return {std::move(l), std::move(lbar)};
}

// ---------------------------------------------------------------------------
// Shift estimation
// ---------------------------------------------------------------------------

inline OffsetEstimate estimate_shift(PlaneRef frame_i, PlaneRef frame_c,
                                     const TcConfig& cfg = {}) {
  if (frame_i.h != frame_c.h || frame_i.w != frame_c.w) {
    throw DimensionError("estimate_shift frames differ in size");
  }
  const int r = cfg.search_radius;
  if (frame_i.h <= 2 * r || frame_i.w <= 2 * r) {
    throw DimensionError("estimate_shift needs H,W > 2*search_radius");
  }
  const int side = 2 * r + 1;
  const int n_cand = side * side;
  const double eps2 = cfg.charbonnier_eps * cfg.charbonnier_eps;

  OffsetEstimate est;
  est.cost_map.resize(static_cast<std::size_t>(n_cand));
  for (int v = -r; v <= r; ++v) {
    for (int u = -r; u <= r; ++u) {
      double acc = 0.0;
      for (int y = 0; y < frame_i.h; ++y) {
        const int sy = clamp_index(y + v, frame_i.h);
        for (int x = 0; x < frame_i.w; ++x) {
          const int sx = clamp_index(x + u, frame_i.w);
          const double d = static_cast<double>(frame_i.at(sy, sx)) - frame_c.at(y, x);
          acc += std::sqrt(d * d + eps2);
        }
      }
      est.cost_map[static_cast<std::size_t>((v + r) * side + (u + r))] =
          acc / (static_cast<double>(frame_i.h) * frame_i.w);
    }
  }

  double min_cost = est.cost_map[0];
  for (double c : est.cost_map) min_cost = std::min(min_cost, c);
  est.distribution.resize(static_cast<std::size_t>(n_cand));
  double total = 0.0;
  for (int i = 0; i < n_cand; ++i) {
    est.distribution[static_cast<std::size_t>(i)] =
        std::exp(-(est.cost_map[static_cast<std::size_t>(i)] - min_cost) / cfg.softmax_temp);
    total += est.distribution[static_cast<std::size_t>(i)];
  }
  double entropy = 0.0;
  for (int v = -r; v <= r; ++v) {
    for (int u = -r; u <= r; ++u) {
      double& p = est.distribution[static_cast<std::size_t>((v + r) * side + (u + r))];
      p /= total;
      est.u += p * u;
      est.v += p * v;
      if (p > 0.0) entropy -= p * std::log(p);
    }
  }
  est.confidence = 1.0 - entropy / std::log(static_cast<double>(n_cand));
  if (est.confidence < 0.0) est.confidence = 0.0;
  if (est.confidence > 1.0) est.confidence = 1.0;
  return est;
}

// Two-way softmax over gain-scaled confidences.
inline std::pair<double, double> modality_weights(double conf_vi, double conf_ir,
                                                  double gamma) {
  const double w_vi = 1.0 / (1.0 + std::exp(-gamma * (conf_vi - conf_ir)));
  return {w_vi, 1.0 - w_vi};
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

namespace detail {

inline double smooth_l1(double x, double delta) {
  const double a = std::fabs(x);
  return a < delta ? 0.5 * x * x / delta : a - 0.5 * delta;
}

// W(X, delta): samples X at (y + v, x + u), clamped bilinear.
inline Plane align_warp(PlaneRef x, double u, double v) {
  return warp_bilinear(x, -u, -v);
}

inline double charbonnier_mean(const Plane& a, double eps) {
  const double eps2 = eps * eps;
  double acc = 0.0;
  for (float v : a.v) acc += std::sqrt(static_cast<double>(v) * v + eps2);
  return acc / static_cast<double>(a.v.size());
}

}  // namespace detail

inline TcBreakdown tc_loss(const Clip& fused, const Clip& vi, const Clip& ir,
                           const TcConfig& cfg = {}) {
  const auto same_twh = [&](const Clip& a, const char* name) {
    if (a.t() != fused.t() || a.h() != fused.h() || a.w() != fused.w()) {
      throw DimensionError(std::string("tc_loss: ") + name +
                           " clip differs in T/H/W from the fused clip, " +
                           a.shape().str() + " vs " + fused.shape().str());
    }
  };
  same_twh(vi, "visible");
  same_twh(ir, "infrared");
  if (fused.t() < 3) {
    throw InsufficientFramesError("tc_loss needs T >= 3, got T=" +
                                  std::to_string(fused.t()));
  }

  const auto [l_f, lbar_f] = lowfreq_project(fused, cfg);
  const auto [l_vi, lbar_vi] = lowfreq_project(vi, cfg);
  const auto [l_ir, lbar_ir] = lowfreq_project(ir, cfg);

  TcBreakdown out;
  out.center = fused.t() / 2;
  const int c = out.center;

  double sum_shift = 0.0, sum_align = 0.0, sum_grad = 0.0;
  for (int i = 0; i < fused.t(); ++i) {
    if (i == c) continue;
    TcNeighbor nb;
    nb.frame = i;
    nb.vi = estimate_shift(lbar_vi.plane(i, 0), lbar_vi.plane(c, 0), cfg);
    nb.ir = estimate_shift(lbar_ir.plane(i, 0), lbar_ir.plane(c, 0), cfg);
    nb.fused = estimate_shift(lbar_f.plane(i, 0), lbar_f.plane(c, 0), cfg);

    if (cfg.force_weights) {
      nb.w_vi = (*cfg.force_weights)[0];
      nb.w_ir = (*cfg.force_weights)[1];
    } else {
      std::tie(nb.w_vi, nb.w_ir) =
          modality_weights(nb.vi.confidence, nb.ir.confidence, cfg.conf_gain);
    }
    nb.ref_u = nb.w_vi * nb.vi.u + nb.w_ir * nb.ir.u;
    nb.ref_v = nb.w_vi * nb.vi.v + nb.w_ir * nb.ir.v;

    nb.shift_err = 0.5 * (detail::smooth_l1(nb.fused.u - nb.ref_u, cfg.huber_delta) +
                          detail::smooth_l1(nb.fused.v - nb.ref_v, cfg.huber_delta));

    // Aligned residuals on the unnormalized blurred frames; both the fused
    // and reference residuals warp by the reference shift.
    const Plane wf = detail::align_warp(l_f.plane(i, 0), nb.ref_u, nb.ref_v);
    const Plane wv = detail::align_warp(l_vi.plane(i, 0), nb.ref_u, nb.ref_v);
    const Plane wi = detail::align_warp(l_ir.plane(i, 0), nb.ref_u, nb.ref_v);
    const PlaneRef cf = l_f.plane(c, 0);
    const PlaneRef cv = l_vi.plane(c, 0);
    const PlaneRef ci = l_ir.plane(c, 0);

    Plane diff(fused.h(), fused.w());
    for (int y = 0; y < fused.h(); ++y) {
      for (int x = 0; x < fused.w(); ++x) {
        const double rf = static_cast<double>(wf.at(y, x)) - cf.at(y, x);
        const double rref = nb.w_vi * (static_cast<double>(wv.at(y, x)) - cv.at(y, x)) +
                            nb.w_ir * (static_cast<double>(wi.at(y, x)) - ci.at(y, x));
        diff.at(y, x) = static_cast<float>(rf - rref);
      }
    }
    nb.align_resid = detail::charbonnier_mean(diff, cfg.charbonnier_eps);

    const auto [gx, gy] = spatial_gradients(PlaneRef{diff.v.data(), diff.h, diff.w},
                                            GradScheme::kCentral);
    nb.grad_resid = 0.5 * (detail::charbonnier_mean(gx, cfg.charbonnier_eps) +
                           detail::charbonnier_mean(gy, cfg.charbonnier_eps));

    sum_shift += nb.shift_err;
    sum_align += nb.align_resid;
    sum_grad += nb.grad_resid;
    out.per_neighbor.push_back(std::move(nb));
  }

  const double n_neighbors = static_cast<double>(fused.t() - 1);
  out.l_shift = sum_shift / n_neighbors;
  out.l_align = sum_align / n_neighbors;
  out.l_grad = sum_grad / n_neighbors;
  out.total = cfg.w_shift * out.l_shift + cfg.w_align * out.l_align + cfg.w_grad * out.l_grad;
  return out;
}

// Hook for the composite training objective: externally computed intensity,
// gradient, and color terms plus their weights, summed with the weighted
// temporal consistency total.
struct CompositeTerms {
  double l_int = 0.0, l_grad = 0.0, l_color = 0.0;
  double w_int = 0.0, w_grad = 0.0, w_color = 0.0;
  double w_tc = 1.0;
};

inline double composite_objective(const TcBreakdown& tc, const CompositeTerms& ext) {
  return ext.w_int * ext.l_int + ext.w_grad * ext.l_grad + ext.w_color * ext.l_color +
         ext.w_tc * tc.total;
}

}  // namespace ivf
