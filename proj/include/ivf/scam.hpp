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

// High-frequency branch: joint importance scoring over non-overlapping
// spatial blocks, sparse top-K block selection, bidirectional multi-head
// cross-modal attention over per-block token sets (one token per
// spatio-temporal position, block-center sinusoidal position encoding),
// write-back into the feature maps, a parallel local 3D convolution branch
// per modality, and a convex gated fusion of the two updated streams.
//
// Frames whose H or W is not a multiple of the block size are zero-padded
// for scoring and attention and cropped on output; padded regions bias
// their blocks' scores low.

#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/conv.hpp"
#include "ivf/error.hpp"
#include "ivf/rng.hpp"
#include "ivf/video_core.hpp"

namespace ivf {

// Rounds to the nearest multiple of `divisor` (ties upward), never below
// `divisor` itself.
inline int make_divisible(int v, int divisor) {
  if (divisor < 1) throw ParameterError("make_divisible needs divisor >= 1");
  int m = divisor * ((2 * v + divisor) / (2 * divisor));
  if (m < divisor) m = divisor;
  return m;
}

struct ScamConfig {
  int block_size = 8;
  double sparse_ratio = 0.10;
  int heads = 2;
  double expansion = 0.75;

  // Stage presets: sparse ratio 0.10/0.20/0.30, two heads each.
  static ScamConfig stage(int idx) {
    if (idx < 0 || idx > 2) {
      throw ParameterError("scale stage must be 0, 1, or 2, got " + std::to_string(idx));
    }
    ScamConfig cfg;
    const double rhos[3] = {0.10, 0.20, 0.30};
    cfg.sparse_ratio = rhos[idx];
    cfg.heads = 2;
    return cfg;
  }

  int attn_dim(int channels) const {
    const int target = std::max(static_cast<int>(std::floor(expansion * channels)), heads);
    return make_divisible(target, heads);
  }

  int ffn_hidden(int d) const {
    const int h = static_cast<int>(std::ceil(expansion * d));
    return h < 1 ? 1 : h;
  }
};

// ---------------------------------------------------------------------------
// Importance scoring and block selection
// ---------------------------------------------------------------------------

struct BlockSelection {
  std::vector<double> scores;  // per block, row-major over (by, bx)
  std::vector<int> selected;   // K indices, descending score, ties by index
  int k = 0;
  int blocks_x = 0;
  int blocks_y = 0;
  int padded_h = 0;
  int padded_w = 0;
};

namespace detail {

inline Clip pad_spatial_zero(const Clip& clip, int new_h, int new_w) {
  if (new_h == clip.h() && new_w == clip.w()) return clip;
  Clip out(clip.t(), clip.c(), new_h, new_w);
  for (int t = 0; t < clip.t(); ++t) {
    for (int c = 0; c < clip.c(); ++c) {
      const float* src = clip.plane_data(t, c);
      float* dst = out.plane_data(t, c);
      for (int y = 0; y < clip.h(); ++y) {
        std::copy_n(src + static_cast<std::size_t>(y) * clip.w(), clip.w(),
                    dst + static_cast<std::size_t>(y) * new_w);
      }
    }
  }
  return out;
}

inline Clip crop_spatial(const Clip& clip, int new_h, int new_w) {
  if (new_h == clip.h() && new_w == clip.w()) return clip;
  Clip out(clip.t(), clip.c(), new_h, new_w);
  for (int t = 0; t < clip.t(); ++t) {
    for (int c = 0; c < clip.c(); ++c) {
      const float* src = clip.plane_data(t, c);
      float* dst = out.plane_data(t, c);
      for (int y = 0; y < new_h; ++y) {
        std::copy_n(src + static_cast<std::size_t>(y) * clip.w(), new_w,
                    dst + static_cast<std::size_t>(y) * new_w);
      }
    }
  }
  return out;
}

}  // namespace detail

// Joint importance: temporal change of both modalities, mean magnitude, and
// cross-modal difference, channel-averaged, then averaged over each block's
// T x p x p support. The previous frame at t=0 is the frame itself, so the
// temporal terms vanish there.
inline BlockSelection importance_scores(const Clip& h_ir, const Clip& h_vi,
                                        const ScamConfig& cfg) {
  require_same_shape(h_ir, h_vi, "importance_scores ir vs vi");
  const int p = cfg.block_size;
  const int hp = (h_ir.h() + p - 1) / p * p;
  const int wp = (h_ir.w() + p - 1) / p * p;
  const Clip ir = detail::pad_spatial_zero(h_ir, hp, wp);
  const Clip vi = detail::pad_spatial_zero(h_vi, hp, wp);

  BlockSelection sel;
  sel.blocks_y = hp / p;
  sel.blocks_x = wp / p;
  sel.padded_h = hp;
  sel.padded_w = wp;
  const int n_b = sel.blocks_y * sel.blocks_x;
  std::vector<double> sums(static_cast<std::size_t>(n_b), 0.0);

  for (int t = 0; t < ir.t(); ++t) {
    const int tp = t == 0 ? 0 : t - 1;
    for (int y = 0; y < hp; ++y) {
      const int by = y / p;
      for (int x = 0; x < wp; ++x) {
        double s = 0.0;
        for (int c = 0; c < ir.c(); ++c) {
          const double a = ir.at(t, c, y, x);
          const double b = vi.at(t, c, y, x);
          s += std::fabs(a - ir.at(tp, c, y, x)) + std::fabs(b - vi.at(tp, c, y, x)) +
               0.5 * (std::fabs(a) + std::fabs(b)) + std::fabs(a - b);
        }
        sums[static_cast<std::size_t>(by) * sel.blocks_x + (x / p)] += s / ir.c();
      }
    }
  }
  const double block_elems = static_cast<double>(ir.t()) * p * p;
  sel.scores.resize(static_cast<std::size_t>(n_b));
  for (int b = 0; b < n_b; ++b) {
    sel.scores[static_cast<std::size_t>(b)] = sums[static_cast<std::size_t>(b)] / block_elems;
  }

  sel.k = std::max(1, static_cast<int>(std::floor(cfg.sparse_ratio * n_b)));
  std::vector<int> order(static_cast<std::size_t>(n_b));
  for (int b = 0; b < n_b; ++b) order[static_cast<std::size_t>(b)] = b;
  std::stable_sort(order.begin(), order.end(), [&sel](int a, int b) {
    if (sel.scores[static_cast<std::size_t>(a)] != sel.scores[static_cast<std::size_t>(b)]) {
      return sel.scores[static_cast<std::size_t>(a)] > sel.scores[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  sel.selected.assign(order.begin(), order.begin() + sel.k);
  return sel;
}

// ---------------------------------------------------------------------------
// Position encoding and tokens
// ---------------------------------------------------------------------------

// Sinusoidal encoding of (t/(T-1), cx/W, cy/H): the dimension is split into
// three chunks (remainder to the leading chunks), each chunk alternating
// sin/cos at frequencies geometric in [1, 1000]. Coordinates are block
// centers in the padded frame plus the frame index; every token of a block
// at one frame shares its encoding.
inline std::vector<float> position_encoding(double tn, double xn, double yn, int d) {
  std::vector<float> pe(static_cast<std::size_t>(d));
  const double coord[3] = {tn, xn, yn};
  const int base = d / 3, rem = d % 3;
  int offset = 0;
  for (int chunk = 0; chunk < 3; ++chunk) {
    const int m = base + (chunk < rem ? 1 : 0);
    const int n_freq = (m + 1) / 2;
    for (int j = 0; j < m; ++j) {
      const int fi = j / 2;
      const double omega =
          n_freq > 1 ? std::pow(1000.0, static_cast<double>(fi) / (n_freq - 1)) : 1.0;
      const double ang = omega * coord[chunk];
      pe[static_cast<std::size_t>(offset + j)] =
          static_cast<float>(j % 2 == 0 ? std::sin(ang) : std::cos(ang));
    }
    offset += m;
  }
  return pe;
}

// ---------------------------------------------------------------------------
// Attention parameters
// ---------------------------------------------------------------------------

struct ScamParams {
  int c = 0;
  int d = 0;
  PointwiseMap embed;      // C -> d token embedding
  PointwiseMap wq, wk, wv; // d -> d projections, shared across modalities
  PointwiseMap gate;       // d -> d residual gate logits
  PointwiseMap ffn1;       // d -> hidden
  PointwiseMap ffn2;       // hidden -> d
  PointwiseMap unembed;    // d -> C write-back projection
  PointwiseMap fuse_gate;  // 2C -> C convex fusion gate logits

  static ScamParams zeros(int channels, const ScamConfig& cfg) {
    ScamParams p;
    p.c = channels;
    p.d = cfg.attn_dim(channels);
    const int hidden = cfg.ffn_hidden(p.d);
    p.embed = PointwiseMap(channels, p.d);
    p.wq = PointwiseMap(p.d, p.d);
    p.wk = PointwiseMap(p.d, p.d);
    p.wv = PointwiseMap(p.d, p.d);
    p.gate = PointwiseMap(p.d, p.d);
    p.ffn1 = PointwiseMap(p.d, hidden);
    p.ffn2 = PointwiseMap(hidden, p.d);
    p.unembed = PointwiseMap(p.d, channels);
    p.fuse_gate = PointwiseMap(2 * channels, channels);
    return p;
  }

  // Seeded draws, in order: embed, wq, wk, wv, gate, ffn1, ffn2, unembed,
  // fuse_gate (weights before bias within each).
  static ScamParams seeded(int channels, const ScamConfig& cfg, std::uint64_t seed) {
    ScamParams p = zeros(channels, cfg);
    Rng rng(seed);
    p.embed.init(rng);
    p.wq.init(rng);
    p.wk.init(rng);
    p.wv.init(rng);
    p.gate.init(rng);
    p.ffn1.init(rng);
    p.ffn2.init(rng);
    p.unembed.init(rng);
    p.fuse_gate.init(rng);
    return p;
  }
};

struct ScamLocalParams {
  DepthwiseConv3d dw_ir, dw_vi;  // 3x3x3 depthwise, replicate padding
  PointwiseMap pw_ir, pw_vi;     // C -> C mixing

  static ScamLocalParams zeros(int channels) {
    ScamLocalParams p;
    p.dw_ir = DepthwiseConv3d(channels, 3, 3, 3);
    p.dw_vi = DepthwiseConv3d(channels, 3, 3, 3);
    p.pw_ir = PointwiseMap(channels, channels);
    p.pw_vi = PointwiseMap(channels, channels);
    return p;
  }

  // Seeded draws, in order: dw_ir, pw_ir, dw_vi, pw_vi.
  static ScamLocalParams seeded(int channels, std::uint64_t seed) {
    ScamLocalParams p = zeros(channels);
    Rng rng(seed);
    p.dw_ir.init(rng);
    p.pw_ir.init(rng);
    p.dw_vi.init(rng);
    p.pw_vi.init(rng);
    return p;
  }
};

// ---------------------------------------------------------------------------
// Multi-head cross attention
// ---------------------------------------------------------------------------

// Rows of q attend over rows of k/v. The head dimension is d/heads and each
// head's logits are scaled by 1/sqrt(d/heads); softmax uses max-subtraction.
// If `probs` is given it receives one (n_q x n_k) weight matrix per head.
inline TcGrid multi_head_cross_attention(const TcGrid& q, const TcGrid& k, const TcGrid& v,
                                         int heads, std::vector<TcGrid>* probs = nullptr) {
  if (q.c != k.c || k.c != v.c) {
    throw DimensionError("attention dims disagree");
  }
  if (k.t != v.t) throw DimensionError("key/value token counts disagree");
  if (heads < 1 || q.c % heads != 0) {
    throw DimensionError("token dim " + std::to_string(q.c) +
                         " not divisible by heads " + std::to_string(heads));
  }
  const int dh = q.c / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  TcGrid out(q.t, q.c);
  if (probs) probs->assign(static_cast<std::size_t>(heads), TcGrid(q.t, k.t));

  std::vector<double> logits(static_cast<std::size_t>(k.t));
  for (int h = 0; h < heads; ++h) {
    const int off = h * dh;
    for (int i = 0; i < q.t; ++i) {
      double m = -1e300;
      for (int j = 0; j < k.t; ++j) {
        double dot = 0.0;
        for (int e = 0; e < dh; ++e) {
          dot += static_cast<double>(q.at(i, off + e)) * k.at(j, off + e);
        }
        logits[static_cast<std::size_t>(j)] = dot * scale;
        m = std::max(m, logits[static_cast<std::size_t>(j)]);
      }
      double total = 0.0;
      for (int j = 0; j < k.t; ++j) {
        logits[static_cast<std::size_t>(j)] = std::exp(logits[static_cast<std::size_t>(j)] - m);
        total += logits[static_cast<std::size_t>(j)];
      }
      for (int e = 0; e < dh; ++e) {
        double acc = 0.0;
        for (int j = 0; j < k.t; ++j) {
          acc += logits[static_cast<std::size_t>(j)] / total * v.at(j, off + e);
        }
        out.at(i, off + e) = static_cast<float>(acc);
      }
      if (probs) {
        for (int j = 0; j < k.t; ++j) {
          (*probs)[static_cast<std::size_t>(h)].at(i, j) =
              static_cast<float>(logits[static_cast<std::size_t>(j)] / total);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// SCAM forward
// ---------------------------------------------------------------------------

struct ScamTrace {
  BlockSelection selection;
  Clip attn_ir;  // post write-back, pre local branch (cropped)
  Clip attn_vi;
};

namespace detail {

// One token per spatio-temporal position in the block: embedded feature
// vector plus the block's position encoding for that frame.
inline TcGrid block_tokens(const Clip& padded, int block, const BlockSelection& sel,
                           int p, const ScamParams& params) {
  const int by = block / sel.blocks_x;
  const int bx = block % sel.blocks_x;
  const int y0 = by * p, x0 = bx * p;
  const int t_n = padded.t();
  TcGrid raw(t_n * p * p, padded.c());
  for (int t = 0; t < t_n; ++t) {
    for (int yy = 0; yy < p; ++yy) {
      for (int xx = 0; xx < p; ++xx) {
        const int row = (t * p + yy) * p + xx;
        for (int c = 0; c < padded.c(); ++c) {
          raw.at(row, c) = padded.at(t, c, y0 + yy, x0 + xx);
        }
      }
    }
  }
  TcGrid tok = params.embed.apply(raw);
  const double cx = x0 + (p - 1) / 2.0;
  const double cy = y0 + (p - 1) / 2.0;
  for (int t = 0; t < t_n; ++t) {
    const double tn = t_n > 1 ? static_cast<double>(t) / (t_n - 1) : 0.0;
    const std::vector<float> pe =
        position_encoding(tn, cx / sel.padded_w, cy / sel.padded_h, params.d);
    for (int yy = 0; yy < p; ++yy) {
      for (int xx = 0; xx < p; ++xx) {
        const int row = (t * p + yy) * p + xx;
        for (int e = 0; e < params.d; ++e) {
          tok.at(row, e) += pe[static_cast<std::size_t>(e)];
        }
      }
    }
  }
  return tok;
}

// Gated residual around the attention output, then a 2-layer feed-forward
// residual: r = tok + sigmoid(gate(a)) * a; out = r + ffn2(relu(ffn1(r))).
inline TcGrid gated_update(const TcGrid& tok, const TcGrid& attn, const ScamParams& params) {
  TcGrid g = params.gate.apply(attn);
  TcGrid r(tok.t, tok.c);
  for (std::size_t i = 0; i < r.v.size(); ++i) {
    r.v[i] = tok.v[i] + sigmoidf(g.v[i]) * attn.v[i];
  }
  TcGrid hidden = params.ffn1.apply(r);
  for (float& v : hidden.v) v = reluf(v);
  const TcGrid f = params.ffn2.apply(hidden);
  for (std::size_t i = 0; i < r.v.size(); ++i) r.v[i] += f.v[i];
  return r;
}

inline void write_back(Clip& padded, int block, const BlockSelection& sel, int p,
                       const TcGrid& content) {
  const int by = block / sel.blocks_x;
  const int bx = block % sel.blocks_x;
  const int y0 = by * p, x0 = bx * p;
  for (int t = 0; t < padded.t(); ++t) {
    for (int yy = 0; yy < p; ++yy) {
      for (int xx = 0; xx < p; ++xx) {
        const int row = (t * p + yy) * p + xx;
        for (int c = 0; c < padded.c(); ++c) {
          padded.at(t, c, y0 + yy, x0 + xx) = content.at(row, c);
        }
      }
    }
  }
}

}  // namespace detail

inline Clip scam_forward(const Clip& h_ir, const Clip& h_vi, const ScamConfig& cfg,
                         const ScamParams& params, const ScamLocalParams& local,
                         ScamTrace* trace = nullptr) {
  require_same_shape(h_ir, h_vi, "scam_forward ir vs vi");
  if (h_ir.c() != params.c) {
    throw DimensionError("scam params built for C=" + std::to_string(params.c) +
                         ", input has C=" + std::to_string(h_ir.c()));
  }
  const int p = cfg.block_size;
  const BlockSelection sel = importance_scores(h_ir, h_vi, cfg);

  Clip pad_ir = detail::pad_spatial_zero(h_ir, sel.padded_h, sel.padded_w);
  Clip pad_vi = detail::pad_spatial_zero(h_vi, sel.padded_h, sel.padded_w);
  Clip upd_ir = pad_ir, upd_vi = pad_vi;

  for (int block : sel.selected) {
    const TcGrid tok_ir = detail::block_tokens(pad_ir, block, sel, p, params);
    const TcGrid tok_vi = detail::block_tokens(pad_vi, block, sel, p, params);
    const TcGrid a_ir = multi_head_cross_attention(
        params.wq.apply(tok_ir), params.wk.apply(tok_vi), params.wv.apply(tok_vi), cfg.heads);
    const TcGrid a_vi = multi_head_cross_attention(
        params.wq.apply(tok_vi), params.wk.apply(tok_ir), params.wv.apply(tok_ir), cfg.heads);
    detail::write_back(upd_ir, block, sel, p,
                       params.unembed.apply(detail::gated_update(tok_ir, a_ir, params)));
    detail::write_back(upd_vi, block, sel, p,
                       params.unembed.apply(detail::gated_update(tok_vi, a_vi, params)));
  }

  Clip attn_ir = detail::crop_spatial(upd_ir, h_ir.h(), h_ir.w());
  Clip attn_vi = detail::crop_spatial(upd_vi, h_ir.h(), h_ir.w());
  if (trace) {
    trace->selection = sel;
    trace->attn_ir = attn_ir;
    trace->attn_vi = attn_vi;
  }

  const Clip loc_ir = local.pw_ir.apply(local.dw_ir.apply(h_ir));
  const Clip loc_vi = local.pw_vi.apply(local.dw_vi.apply(h_vi));
  float* ui = attn_ir.raw().data();
  float* uv = attn_vi.raw().data();
  for (std::size_t i = 0; i < attn_ir.shape().elements(); ++i) {
    ui[i] += loc_ir.raw()[i];
    uv[i] += loc_vi.raw()[i];
  }

  // Convex gated fusion of the two updated streams.
  Clip cat(h_ir.t(), 2 * h_ir.c(), h_ir.h(), h_ir.w());
  for (int t = 0; t < h_ir.t(); ++t) {
    for (int c = 0; c < h_ir.c(); ++c) {
      cat.copy_plane(t, c, attn_ir, t, c);
      cat.copy_plane(t, h_ir.c() + c, attn_vi, t, c);
    }
  }
  Clip gate = params.fuse_gate.apply(cat);
  for (float& v : gate.raw()) v = sigmoidf(v);

  Clip out(h_ir.shape());
  const std::size_t n = static_cast<std::size_t>(h_ir.h()) * h_ir.w();
  for (int t = 0; t < h_ir.t(); ++t) {
    for (int c = 0; c < h_ir.c(); ++c) {
      const float* g = gate.plane_data(t, c);
      const float* a = attn_ir.plane_data(t, c);
      const float* b = attn_vi.plane_data(t, c);
      float* dst = out.plane_data(t, c);
      for (std::size_t i = 0; i < n; ++i) {
        dst[i] = g[i] * a[i] + (1.f - g[i]) * b[i];
      }
    }
  }
  return out;
}

}  // namespace ivf
