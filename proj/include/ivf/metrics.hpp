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

// Temporal fusion-quality metrics and the rank-agreement statistics used by
// the stress benchmark. Both metrics are lower-is-better.
//
// The mixing-continuity index estimates a per-pixel source mixing
// coefficient from box sums, smooths it, and penalizes (a) its temporal
// variation and (b) the residual between the fused frame differences and
// the mixing-predicted differences on Gaussian-smoothed frames.
//
// The correlation-preservation error compares per-pixel descriptor
// trajectories (infrared contrast vs fused contrast, visible gradient vs
// fused gradient) by windowed Pearson correlation; distortion is (1-rho)/2
// with degenerate (near-constant) trajectories scored 0.5.

#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/error.hpp"
#include "ivf/video_core.hpp"

namespace ivf {

// ---------------------------------------------------------------------------
// Mixing-continuity index
// ---------------------------------------------------------------------------

struct MmciConfig {
  int mix_window = 7;        // box window for the mixing-coefficient sums
  int smooth_k = 9;          // Gaussian applied to frames and alpha maps
  double smooth_sigma = 2.0;
  double lambda_alpha = 1.0;
  double scale = 1.0;
  double eps = 1e-6;         // mixing-coefficient denominator
};

struct MmciResult {
  double value = 0.0;
  double j_alpha = 0.0;
  double j_r = 0.0;
  Clip alpha;  // T x 1 x H x W smoothed mixing coefficients
};

inline MmciResult mmci(const Clip& ir, const Clip& vi, const Clip& fused,
                       const MmciConfig& cfg = {}) {
  if (cfg.mix_window < 3 || cfg.mix_window % 2 == 0) {
    throw ParameterError("mixing window must be odd and >= 3");
  }
  if (fused.t() < 2) {
    throw InsufficientFramesError("mmci needs T >= 2, got T=" + std::to_string(fused.t()));
  }
  const Clip g_ir = to_grayscale(ir);
  const Clip g_vi = to_grayscale(vi);
  const Clip g_f = to_grayscale(fused);
  require_same_shape(g_ir, g_vi, "mmci ir vs vi");
  require_same_shape(g_ir, g_f, "mmci ir vs fused");

  const int t_n = g_f.t(), h = g_f.h(), w = g_f.w();
  const std::size_t n = static_cast<std::size_t>(h) * w;

  // Per-frame mixing coefficient via truncated box sums, then smoothing.
  MmciResult res;
  res.alpha = Clip(t_n, 1, h, w);
  const Kernel2D smooth_ker = Kernel2D::gaussian(cfg.smooth_k, cfg.smooth_sigma);
  Plane num(h, w), den(h, w);
  for (int t = 0; t < t_n; ++t) {
    const float* pi = g_ir.plane_data(t, 0);
    const float* pv = g_vi.plane_data(t, 0);
    const float* pf = g_f.plane_data(t, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double dm = static_cast<double>(pi[i]) - pv[i];
      num.v[i] = static_cast<float>(dm * (static_cast<double>(pf[i]) - pv[i]));
      den.v[i] = static_cast<float>(dm * dm);
    }
    const Plane num_s = box_sum_truncated(PlaneRef{num.v.data(), h, w}, cfg.mix_window);
    const Plane den_s = box_sum_truncated(PlaneRef{den.v.data(), h, w}, cfg.mix_window);
    Plane alpha_t(h, w);
    for (std::size_t i = 0; i < n; ++i) {
      double a = num_s.v[i] / (static_cast<double>(den_s.v[i]) + cfg.eps);
      if (a < 0.0) a = 0.0;
      if (a > 1.0) a = 1.0;
      alpha_t.v[i] = static_cast<float>(a);
    }
    res.alpha.set_plane(t, 0, convolve_replicate(PlaneRef{alpha_t.v.data(), h, w}, smooth_ker));
  }

  const Clip sm_ir = gaussian_blur(g_ir, cfg.smooth_k, cfg.smooth_sigma);
  const Clip sm_vi = gaussian_blur(g_vi, cfg.smooth_k, cfg.smooth_sigma);
  const Clip sm_f = gaussian_blur(g_f, cfg.smooth_k, cfg.smooth_sigma);

  double j_alpha = 0.0, j_r = 0.0;
  for (int t = 1; t < t_n; ++t) {
    const float* a1 = res.alpha.plane_data(t, 0);
    const float* a0 = res.alpha.plane_data(t - 1, 0);
    const float* fi1 = sm_ir.plane_data(t, 0);
    const float* fi0 = sm_ir.plane_data(t - 1, 0);
    const float* fv1 = sm_vi.plane_data(t, 0);
    const float* fv0 = sm_vi.plane_data(t - 1, 0);
    const float* ff1 = sm_f.plane_data(t, 0);
    const float* ff0 = sm_f.plane_data(t - 1, 0);
    double acc_a = 0.0, acc_r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc_a += std::fabs(static_cast<double>(a1[i]) - a0[i]);
      const double abar = 0.5 * (static_cast<double>(a1[i]) + a0[i]);
      const double dy = static_cast<double>(ff1[i]) - ff0[i];
      const double dir = static_cast<double>(fi1[i]) - fi0[i];
      const double dvi = static_cast<double>(fv1[i]) - fv0[i];
      acc_r += std::fabs(dy - abar * dir - (1.0 - abar) * dvi);
    }
    j_alpha += acc_a / static_cast<double>(n);
    j_r += acc_r / static_cast<double>(n);
  }
  res.j_alpha = j_alpha / static_cast<double>(t_n - 1);
  res.j_r = j_r / static_cast<double>(t_n - 1);
  res.value = cfg.scale * (res.j_r + cfg.lambda_alpha * res.j_alpha);
  return res;
}

// ---------------------------------------------------------------------------
// Correlation-preservation error
// ---------------------------------------------------------------------------

struct TcpeConfig {
  int window_len = 5;
  int stride = 1;
  int contrast_window = 7;  // spatial mean window for the contrast descriptor
  double var_eps = 1e-8;    // trajectories below this variance are uninformative
  double w_eps = 1e-6;      // adaptive-weight denominator
  // Overrides the adaptive modality weight w everywhere; diagnostic.
  std::optional<double> weight_override;
};

struct TcpeResult {
  double value = 0.0;
  std::vector<double> window_errors;
  Clip e_maps;  // N_W x 1 x H x W per-pixel window errors
};

namespace detail {

// |X - Mean_box(X)| per pixel.
inline Plane contrast_descriptor(PlaneRef f, int window) {
  Plane mean = box_mean_truncated(f, window);
  for (int y = 0; y < f.h; ++y) {
    for (int x = 0; x < f.w; ++x) {
      mean.at(y, x) = std::fabs(f.at(y, x) - mean.at(y, x));
    }
  }
  return mean;
}

// (|dx| + |dy|)/8 with forward differences.
inline Plane gradient_descriptor(PlaneRef f) {
  auto [gx, gy] = spatial_gradients(f, GradScheme::kForward);
  Plane out(f.h, f.w);
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    out.v[i] = (std::fabs(gx.v[i]) + std::fabs(gy.v[i])) / 8.0f;
  }
  return out;
}

}  // namespace detail

inline TcpeResult tcpe(const Clip& ir, const Clip& vi, const Clip& fused,
                       const TcpeConfig& cfg = {}) {
  if (cfg.window_len < 3) throw ParameterError("tcpe window_len must be >= 3");
  if (cfg.stride < 1) throw ParameterError("tcpe stride must be >= 1");
  const Clip g_ir = to_grayscale(ir);
  const Clip g_vi = to_grayscale(vi);
  const Clip g_f = to_grayscale(fused);
  require_same_shape(g_ir, g_vi, "tcpe ir vs vi");
  require_same_shape(g_ir, g_f, "tcpe ir vs fused");
  const int t_n = g_f.t(), h = g_f.h(), w = g_f.w();
  if (t_n < cfg.window_len) {
    throw InsufficientFramesError("tcpe needs T >= window_len (" +
                                  std::to_string(cfg.window_len) + "), got T=" +
                                  std::to_string(t_n));
  }

  // Per-frame descriptor planes.
  std::vector<Plane> c_ir(static_cast<std::size_t>(t_n)), c_f(static_cast<std::size_t>(t_n));
  std::vector<Plane> g_vid(static_cast<std::size_t>(t_n)), g_fd(static_cast<std::size_t>(t_n));
  for (int t = 0; t < t_n; ++t) {
    c_ir[static_cast<std::size_t>(t)] =
        detail::contrast_descriptor(g_ir.plane(t, 0), cfg.contrast_window);
    c_f[static_cast<std::size_t>(t)] =
        detail::contrast_descriptor(g_f.plane(t, 0), cfg.contrast_window);
    g_vid[static_cast<std::size_t>(t)] = detail::gradient_descriptor(g_vi.plane(t, 0));
    g_fd[static_cast<std::size_t>(t)] = detail::gradient_descriptor(g_f.plane(t, 0));
  }

  const int n_w = (t_n - cfg.window_len) / cfg.stride + 1;
  TcpeResult res;
  res.e_maps = Clip(n_w, 1, h, w);
  const std::size_t n = static_cast<std::size_t>(h) * w;
  const double len = cfg.window_len;

  for (int wi = 0; wi < n_w; ++wi) {
    const int t0 = wi * cfg.stride;
    float* emap = res.e_maps.plane_data(wi, 0);
    double acc_e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double sa = 0, sb = 0, sab = 0, sa2 = 0, sb2 = 0;  // ir/fused contrast
      double sc = 0, sd = 0, scd = 0, sc2 = 0, sd2 = 0;  // vi/fused gradient
      for (int dt = 0; dt < cfg.window_len; ++dt) {
        const std::size_t t = static_cast<std::size_t>(t0 + dt);
        const double a = c_ir[t].v[i], b = c_f[t].v[i];
        const double cdesc = g_vid[t].v[i], ddesc = g_fd[t].v[i];
        sa += a; sb += b; sab += a * b; sa2 += a * a; sb2 += b * b;
        sc += cdesc; sd += ddesc; scd += cdesc * ddesc; sc2 += cdesc * cdesc; sd2 += ddesc * ddesc;
      }
      const auto distortion = [len, &cfg](double sx, double sy, double sxy, double sx2,
                                          double sy2) {
        const double mx = sx / len, my = sy / len;
        const double vx = sx2 / len - mx * mx;
        const double vy = sy2 / len - my * my;
        if (vx < cfg.var_eps || vy < cfg.var_eps) return 0.5;
        double rho = (sxy / len - mx * my) / std::sqrt(vx * vy);
        if (rho > 1.0) rho = 1.0;
        if (rho < -1.0) rho = -1.0;
        return (1.0 - rho) / 2.0;
      };
      const double d_r = distortion(sa, sb, sab, sa2, sb2);
      const double d_v = distortion(sc, sd, scd, sc2, sd2);
      const double wgt = cfg.weight_override
                             ? *cfg.weight_override
                             : (sa / len) / (sa / len + sc / len + cfg.w_eps);
      const double e = wgt * d_r + (1.0 - wgt) * d_v;
      emap[i] = static_cast<float>(e);
      acc_e += e;
    }
    res.window_errors.push_back(acc_e / static_cast<double>(n));
  }

  double total = 0.0;
  for (double e : res.window_errors) total += e;
  res.value = total / static_cast<double>(n_w);
  return res;
}

// ---------------------------------------------------------------------------
// Rank statistics
// ---------------------------------------------------------------------------

enum class MetricDirection { kLowerBetter, kHigherBetter };

struct RankStats {
  double global_spearman = 0.0;
  double global_pearson = 0.0;
  double mean_seq_spearman = 0.0;
  double monotonic_rate = 0.0;
  double pairwise_acc = 0.0;
  double adjacent_sep = 0.0;
  double avg_rank = 0.0;  // filled in by the benchmark across metrics
};

// Average ranks (1-based), ties averaged.
inline std::vector<double> average_ranks(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&values](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Population Pearson; 0 when either side is constant.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ParameterError("pearson needs two equal-length non-empty vectors");
  }
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  const double ma = sa / n, mb = sb / n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma, db = b[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  double rho = cov / std::sqrt(va * vb);
  if (rho > 1.0) rho = 1.0;
  if (rho < -1.0) rho = -1.0;
  return rho;
}

inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  return pearson(average_ranks(a), average_ranks(b));
}

// values[s][l]: metric value of sequence s at severity level l. Higher-better
// metrics are sign-flipped so that increasing with severity is the target.
inline RankStats rank_stats(const std::vector<std::vector<double>>& values,
                            MetricDirection direction) {
  if (values.empty()) throw ParameterError("rank_stats needs at least one sequence");
  const std::size_t levels = values.front().size();
  if (levels < 2) throw ParameterError("rank_stats needs at least two levels");
  for (const auto& row : values) {
    if (row.size() != levels) throw ParameterError("rank_stats needs a rectangular matrix");
    for (double v : row) {
      if (std::isnan(v)) throw ParameterError("rank_stats input contains NaN");
    }
  }
  const double sign = direction == MetricDirection::kHigherBetter ? -1.0 : 1.0;
  const std::size_t seqs = values.size();

  std::vector<double> pooled, pooled_levels;
  pooled.reserve(seqs * levels);
  pooled_levels.reserve(seqs * levels);
  for (std::size_t s = 0; s < seqs; ++s) {
    for (std::size_t l = 0; l < levels; ++l) {
      pooled.push_back(sign * values[s][l]);
      pooled_levels.push_back(static_cast<double>(l));
    }
  }

  RankStats st;
  st.global_spearman = spearman(pooled, pooled_levels);
  st.global_pearson = pearson(pooled, pooled_levels);

  double seq_sp = 0.0, monotonic = 0.0, pair_correct = 0.0, pair_total = 0.0;
  std::vector<double> level_idx(levels);
  for (std::size_t l = 0; l < levels; ++l) level_idx[l] = static_cast<double>(l);
  for (std::size_t s = 0; s < seqs; ++s) {
    std::vector<double> row(levels);
    for (std::size_t l = 0; l < levels; ++l) row[l] = sign * values[s][l];
    seq_sp += spearman(row, level_idx);
    bool strict = true;
    for (std::size_t l = 0; l + 1 < levels; ++l) {
      if (!(row[l + 1] > row[l])) strict = false;
    }
    if (strict) monotonic += 1.0;
    for (std::size_t i = 0; i < levels; ++i) {
      for (std::size_t j = i + 1; j < levels; ++j) {
        pair_total += 1.0;
        if (row[j] > row[i]) {
          pair_correct += 1.0;
        } else if (row[j] == row[i]) {
          pair_correct += 0.5;
        }
      }
    }
  }
  st.mean_seq_spearman = seq_sp / static_cast<double>(seqs);
  st.monotonic_rate = monotonic / static_cast<double>(seqs);
  st.pairwise_acc = pair_correct / pair_total;

  // Cohen's-d style separation between adjacent levels, floored at zero per
  // pair; degenerate pooled deviation contributes zero.
  double sep = 0.0;
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    double m0 = 0, m1 = 0;
    for (std::size_t s = 0; s < seqs; ++s) {
      m0 += sign * values[s][l];
      m1 += sign * values[s][l + 1];
    }
    m0 /= static_cast<double>(seqs);
    m1 /= static_cast<double>(seqs);
    double v0 = 0, v1 = 0;
    for (std::size_t s = 0; s < seqs; ++s) {
      const double d0 = sign * values[s][l] - m0;
      const double d1 = sign * values[s][l + 1] - m1;
      v0 += d0 * d0;
      v1 += d1 * d1;
    }
    v0 /= static_cast<double>(seqs);
    v1 /= static_cast<double>(seqs);
    const double pooled_sd = std::sqrt(0.5 * (v0 + v1));
    if (pooled_sd > 1e-12) {
      const double d = (m1 - m0) / pooled_sd;
      if (d > 0.0) sep += d;
    }
  }
  st.adjacent_sep = sep / static_cast<double>(levels - 1);
  return st;
}

}  // namespace ivf
