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

#include "ivf/scam.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "catch2/catch_amalgamated.hpp"
#include "ivf/rng.hpp"

namespace {

using ivf::Clip;
using ivf::TcGrid;

Clip random_clip(int t, int c, int h, int w, std::uint64_t seed) {
  ivf::Rng rng(seed);
  Clip clip(t, c, h, w);
  for (auto& v : clip.raw()) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  return clip;
}

// out[o] = bias[o] + sum_i w[o*in+i] * x[i]
std::vector<double> mat_apply(const ivf::PointwiseMap& m, const std::vector<double>& x) {
  std::vector<double> out(static_cast<std::size_t>(m.out_c));
  for (int o = 0; o < m.out_c; ++o) {
    double acc = m.bias[static_cast<std::size_t>(o)];
    for (int i = 0; i < m.in_c; ++i) {
      acc += static_cast<double>(m.w[static_cast<std::size_t>(o) * m.in_c + i]) *
             x[static_cast<std::size_t>(i)];
    }
    out[static_cast<std::size_t>(o)] = acc;
  }
  return out;
}

std::vector<double> pe_oracle(double tn, double xn, double yn, int d) {
  std::vector<double> pe(static_cast<std::size_t>(d));
  const double coord[3] = {tn, xn, yn};
  const int base = d / 3, rem = d % 3;
  int offset = 0;
  for (int chunk = 0; chunk < 3; ++chunk) {
    const int m = base + (chunk < rem ? 1 : 0);
    const int n_freq = (m + 1) / 2;
    for (int j = 0; j < m; ++j) {
      const double omega =
          n_freq > 1 ? std::pow(1000.0, static_cast<double>(j / 2) / (n_freq - 1)) : 1.0;
      pe[static_cast<std::size_t>(offset + j)] =
          j % 2 == 0 ? std::sin(omega * coord[chunk]) : std::cos(omega * coord[chunk]);
    }
    offset += m;
  }
  return pe;
}

}  // namespace

TEST_CASE("make_divisible rounds to the nearest multiple with a floor") {
  CHECK(ivf::make_divisible(3, 2) == 4);   // tie rounds upward
  CHECK(ivf::make_divisible(24, 2) == 24);
  CHECK(ivf::make_divisible(5, 4) == 4);
  CHECK(ivf::make_divisible(6, 4) == 8);   // tie rounds upward
  CHECK(ivf::make_divisible(1, 4) == 4);   // floor at the divisor
  CHECK(ivf::make_divisible(0, 3) == 3);
  CHECK_THROWS_AS(ivf::make_divisible(5, 0), ivf::ParameterError);
}

TEST_CASE("attention width follows the expansion rule") {
  ivf::ScamConfig cfg;
  cfg.heads = 2;
  CHECK(cfg.attn_dim(32) == 24);
  CHECK(cfg.attn_dim(4) == 4);
  CHECK(cfg.attn_dim(1) == 2);  // floor(0.75) = 0 -> max with heads
  for (int c = 1; c <= 64; ++c) {
    const int d = cfg.attn_dim(c);
    CHECK(d % cfg.heads == 0);
    CHECK(d >= cfg.heads);
  }
}

TEST_CASE("stage presets change only the sparse ratio") {
  CHECK(ivf::ScamConfig::stage(0).sparse_ratio == 0.10);
  CHECK(ivf::ScamConfig::stage(1).sparse_ratio == 0.20);
  CHECK(ivf::ScamConfig::stage(2).sparse_ratio == 0.30);
  for (int s = 0; s < 3; ++s) CHECK(ivf::ScamConfig::stage(s).heads == 2);
  CHECK_THROWS_AS(ivf::ScamConfig::stage(3), ivf::ParameterError);
  CHECK_THROWS_AS(ivf::ScamConfig::stage(-1), ivf::ParameterError);
}

TEST_CASE("zero inputs select block zero by tie-break") {
  ivf::ScamConfig cfg;
  cfg.block_size = 8;
  cfg.sparse_ratio = 0.10;
  const Clip zero(2, 2, 16, 16, 0.f);
  const ivf::BlockSelection sel = ivf::importance_scores(zero, zero, cfg);
  REQUIRE(sel.blocks_x == 2);
  REQUIRE(sel.blocks_y == 2);
  CHECK(sel.k == 1);  // max(1, floor(0.4))
  REQUIRE(sel.selected.size() == 1);
  CHECK(sel.selected[0] == 0);
  for (double s : sel.scores) CHECK(s == 0.0);

  // Full-tie at rho=1 keeps ascending index order.
  cfg.sparse_ratio = 1.0;
  const ivf::BlockSelection all = ivf::importance_scores(zero, zero, cfg);
  REQUIRE(all.k == 4);
  for (int b = 0; b < 4; ++b) CHECK(all.selected[static_cast<std::size_t>(b)] == b);
}

TEST_CASE("block scores match an exhaustive per-block oracle") {
  const int T = 3, C = 2, H = 12, W = 20;
  const Clip ir = random_clip(T, C, H, W, 71);
  const Clip vi = random_clip(T, C, H, W, 72);
  ivf::ScamConfig cfg;
  cfg.block_size = 4;
  cfg.sparse_ratio = 0.25;
  const ivf::BlockSelection sel = ivf::importance_scores(ir, vi, cfg);
  REQUIRE(sel.blocks_y == 3);
  REQUIRE(sel.blocks_x == 5);
  REQUIRE(sel.k == 3);  // floor(0.25 * 15)

  std::vector<double> want(15, 0.0);
  for (int t = 0; t < T; ++t) {
    const int tp = t == 0 ? 0 : t - 1;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) {
          const double a = ir.at(t, c, y, x);
          const double b = vi.at(t, c, y, x);
          s += std::fabs(a - ir.at(tp, c, y, x)) + std::fabs(b - vi.at(tp, c, y, x)) +
               0.5 * (std::fabs(a) + std::fabs(b)) + std::fabs(a - b);
        }
        want[static_cast<std::size_t>(y / 4) * 5 + (x / 4)] += s / C;
      }
    }
  }
  for (auto& v : want) v /= static_cast<double>(T) * 4 * 4;
  for (int b = 0; b < 15; ++b) {
    CHECK_THAT(sel.scores[static_cast<std::size_t>(b)],
               Catch::Matchers::WithinAbs(want[static_cast<std::size_t>(b)], 1e-9));
  }

  // Selected set equals the brute-force descending sort prefix.
  std::vector<int> order(15);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (want[static_cast<std::size_t>(a)] != want[static_cast<std::size_t>(b)]) {
      return want[static_cast<std::size_t>(a)] > want[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  for (int i = 0; i < sel.k; ++i) {
    CHECK(sel.selected[static_cast<std::size_t>(i)] == order[static_cast<std::size_t>(i)]);
  }

  // Every selected score dominates every unselected score.
  std::vector<bool> is_sel(15, false);
  for (int b : sel.selected) is_sel[static_cast<std::size_t>(b)] = true;
  for (int a = 0; a < 15; ++a) {
    if (!is_sel[static_cast<std::size_t>(a)]) continue;
    for (int b = 0; b < 15; ++b) {
      if (is_sel[static_cast<std::size_t>(b)]) continue;
      CHECK(sel.scores[static_cast<std::size_t>(a)] >=
            sel.scores[static_cast<std::size_t>(b)]);
    }
  }
}

TEST_CASE("selection count stays within bounds for any ratio") {
  ivf::Rng rng(73);
  for (int trial = 0; trial < 30; ++trial) {
    ivf::ScamConfig cfg;
    cfg.block_size = 1 + static_cast<int>(rng.uniform_int(0, 7));
    cfg.sparse_ratio = rng.uniform01();
    if (cfg.sparse_ratio == 0.0) cfg.sparse_ratio = 1.0;
    const int h = 2 + static_cast<int>(rng.uniform_int(0, 20));
    const int w = 2 + static_cast<int>(rng.uniform_int(0, 20));
    const Clip ir = random_clip(2, 1, h, w, 1000 + static_cast<std::uint64_t>(trial));
    const Clip vi = random_clip(2, 1, h, w, 2000 + static_cast<std::uint64_t>(trial));
    const ivf::BlockSelection sel = ivf::importance_scores(ir, vi, cfg);
    const int n_b = sel.blocks_x * sel.blocks_y;
    CHECK(sel.k >= 1);
    CHECK(sel.k <= n_b);
    CHECK(static_cast<int>(sel.selected.size()) == sel.k);
    CHECK(sel.k == std::max(1, static_cast<int>(std::floor(cfg.sparse_ratio * n_b))));
  }
}

TEST_CASE("position encoding structure and range") {
  // d=6 splits into three sin/cos pairs at unit frequency.
  const auto pe6 = ivf::position_encoding(0.3, 0.6, 0.9, 6);
  CHECK_THAT(pe6[0], Catch::Matchers::WithinAbs(std::sin(0.3), 1e-6));
  CHECK_THAT(pe6[1], Catch::Matchers::WithinAbs(std::cos(0.3), 1e-6));
  CHECK_THAT(pe6[2], Catch::Matchers::WithinAbs(std::sin(0.6), 1e-6));
  CHECK_THAT(pe6[3], Catch::Matchers::WithinAbs(std::cos(0.6), 1e-6));
  CHECK_THAT(pe6[4], Catch::Matchers::WithinAbs(std::sin(0.9), 1e-6));
  CHECK_THAT(pe6[5], Catch::Matchers::WithinAbs(std::cos(0.9), 1e-6));

  // d=8: leading chunks get the remainder; third frequency is 1000.
  const auto pe8 = ivf::position_encoding(0.2, 0.5, 0.8, 8);
  CHECK_THAT(pe8[2], Catch::Matchers::WithinAbs(std::sin(1000.0 * 0.2), 1e-5));

  for (int d : {4, 6, 8, 12, 24}) {
    const auto pe = ivf::position_encoding(0.7, 0.1, 0.4, d);
    REQUIRE(static_cast<int>(pe.size()) == d);
    for (float v : pe) {
      CHECK(v >= -1.f);
      CHECK(v <= 1.f);
    }
  }
}

TEST_CASE("attention rows are convex weights") {
  ivf::Rng rng(74);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = 4;
    TcGrid q(5, d), k(7, d), v(7, d);
    for (auto& x : q.v) x = static_cast<float>(rng.uniform(-3.0, 3.0));
    for (auto& x : k.v) x = static_cast<float>(rng.uniform(-3.0, 3.0));
    for (auto& x : v.v) x = static_cast<float>(rng.uniform(-3.0, 3.0));
    std::vector<TcGrid> probs;
    ivf::multi_head_cross_attention(q, k, v, 2, &probs);
    REQUIRE(probs.size() == 2);
    for (const TcGrid& head : probs) {
      for (int i = 0; i < 5; ++i) {
        double row = 0.0;
        for (int j = 0; j < 7; ++j) {
          const float w = head.at(i, j);
          CHECK(w >= 0.f);
          CHECK(w <= 1.f);
          row += w;
        }
        CHECK(std::fabs(row - 1.0) < 1e-5);
      }
    }
  }
}

TEST_CASE("attention reproduces a hand-evaluated softmax") {
  // One head, d=1: logits (0, ln 3) give weights (0.25, 0.75).
  TcGrid q(1, 1), k(2, 1), v(2, 1);
  q.at(0, 0) = 1.f;
  k.at(0, 0) = 0.f;
  k.at(1, 0) = static_cast<float>(std::log(3.0));
  v.at(0, 0) = 1.f;
  v.at(1, 0) = 5.f;
  std::vector<TcGrid> probs;
  const TcGrid out = ivf::multi_head_cross_attention(q, k, v, 1, &probs);
  CHECK_THAT(probs[0].at(0, 0), Catch::Matchers::WithinAbs(0.25, 1e-6));
  CHECK_THAT(probs[0].at(0, 1), Catch::Matchers::WithinAbs(0.75, 1e-6));
  CHECK_THAT(out.at(0, 0), Catch::Matchers::WithinAbs(0.25 * 1.0 + 0.75 * 5.0, 1e-6));
}

TEST_CASE("attention degenerate cases") {
  // A single key/value token takes all the weight.
  TcGrid q(3, 2), k(1, 2), v(1, 2);
  ivf::Rng rng(75);
  for (auto& x : q.v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  for (auto& x : k.v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  v.at(0, 0) = 0.7f;
  v.at(0, 1) = -0.2f;
  std::vector<TcGrid> probs;
  const TcGrid out = ivf::multi_head_cross_attention(q, k, v, 2, &probs);
  for (int i = 0; i < 3; ++i) {
    CHECK(probs[0].at(i, 0) == 1.f);
    CHECK_THAT(out.at(i, 0), Catch::Matchers::WithinAbs(0.7, 1e-6));
    CHECK_THAT(out.at(i, 1), Catch::Matchers::WithinAbs(-0.2, 1e-6));
  }

  // Constant value rows pass through any attention pattern.
  TcGrid kc(6, 2), vc(6, 2);
  for (auto& x : kc.v) x = static_cast<float>(rng.uniform(-2.0, 2.0));
  for (int j = 0; j < 6; ++j) {
    vc.at(j, 0) = 1.25f;
    vc.at(j, 1) = -0.5f;
  }
  const TcGrid cout = ivf::multi_head_cross_attention(q, kc, vc, 2);
  for (int i = 0; i < 3; ++i) {
    CHECK_THAT(cout.at(i, 0), Catch::Matchers::WithinAbs(1.25, 1e-6));
    CHECK_THAT(cout.at(i, 1), Catch::Matchers::WithinAbs(-0.5, 1e-6));
  }

  // Extreme logits still form a normalized row.
  TcGrid qe(1, 1), ke(3, 1), ve(3, 1);
  qe.at(0, 0) = 40.f;
  ke.at(0, 0) = -40.f;
  ke.at(1, 0) = 0.f;
  ke.at(2, 0) = 40.f;
  ve.at(0, 0) = 1.f;
  ve.at(1, 0) = 2.f;
  ve.at(2, 0) = 3.f;
  std::vector<TcGrid> pe;
  const TcGrid eout = ivf::multi_head_cross_attention(qe, ke, ve, 1, &pe);
  double row = 0.0;
  for (int j = 0; j < 3; ++j) row += pe[0].at(0, j);
  CHECK(std::fabs(row - 1.0) < 1e-5);
  CHECK_THAT(eout.at(0, 0), Catch::Matchers::WithinAbs(3.0, 1e-5));

  CHECK_THROWS_AS(ivf::multi_head_cross_attention(q, k, v, 3), ivf::DimensionError);
}

TEST_CASE("unselected blocks are bitwise untouched before the local branch") {
  const int T = 2, C = 3, H = 16, W = 24;
  const Clip ir = random_clip(T, C, H, W, 76);
  const Clip vi = random_clip(T, C, H, W, 77);
  ivf::ScamConfig cfg;
  cfg.block_size = 8;
  cfg.sparse_ratio = 0.34;  // floor(0.34 * 6) = 2 of 6 blocks
  const ivf::ScamParams params = ivf::ScamParams::seeded(C, cfg, 78);
  const ivf::ScamLocalParams local = ivf::ScamLocalParams::seeded(C, 79);

  ivf::ScamTrace trace;
  ivf::scam_forward(ir, vi, cfg, params, local, &trace);
  REQUIRE(trace.selection.k == 2);

  std::vector<bool> is_sel(static_cast<std::size_t>(6), false);
  for (int b : trace.selection.selected) is_sel[static_cast<std::size_t>(b)] = true;
  for (int b = 0; b < 6; ++b) {
    if (is_sel[static_cast<std::size_t>(b)]) continue;
    const int y0 = (b / trace.selection.blocks_x) * 8;
    const int x0 = (b % trace.selection.blocks_x) * 8;
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < C; ++c) {
        for (int y = y0; y < y0 + 8; ++y) {
          for (int x = x0; x < x0 + 8; ++x) {
            CHECK(trace.attn_ir.at(t, c, y, x) == ir.at(t, c, y, x));
            CHECK(trace.attn_vi.at(t, c, y, x) == vi.at(t, c, y, x));
          }
        }
      }
    }
  }
}

TEST_CASE("a half-open fuse gate averages the two updated streams") {
  const int T = 2, C = 2, H = 8, W = 16;
  const Clip ir = random_clip(T, C, H, W, 80);
  const Clip vi = random_clip(T, C, H, W, 81);
  ivf::ScamConfig cfg;
  cfg.block_size = 8;
  ivf::ScamParams params = ivf::ScamParams::seeded(C, cfg, 82);
  // Zero fusion gate parameters: sigmoid(0) = 1/2 everywhere.
  std::fill(params.fuse_gate.w.begin(), params.fuse_gate.w.end(), 0.f);
  std::fill(params.fuse_gate.bias.begin(), params.fuse_gate.bias.end(), 0.f);
  const ivf::ScamLocalParams local = ivf::ScamLocalParams::zeros(C);

  ivf::ScamTrace trace;
  const Clip out = ivf::scam_forward(ir, vi, cfg, params, local, &trace);
  for (std::size_t i = 0; i < out.raw().size(); ++i) {
    const float want = 0.5f * trace.attn_ir.raw()[i] + 0.5f * trace.attn_vi.raw()[i];
    CHECK_THAT(out.raw()[i], Catch::Matchers::WithinAbs(want, 1e-6));
  }
}

TEST_CASE("block processing order does not matter") {
  const int T = 2, C = 2, H = 16, W = 16, p = 8;
  const Clip ir = random_clip(T, C, H, W, 83);
  const Clip vi = random_clip(T, C, H, W, 84);
  ivf::ScamConfig cfg;
  cfg.block_size = p;
  cfg.sparse_ratio = 1.0;
  const ivf::ScamParams params = ivf::ScamParams::seeded(C, cfg, 85);
  const ivf::BlockSelection sel = ivf::importance_scores(ir, vi, cfg);
  REQUIRE(sel.k == 4);

  const auto run_order = [&](const std::vector<int>& order) {
    Clip upd = ir;
    for (int block : order) {
      const TcGrid tok_ir = ivf::detail::block_tokens(ir, block, sel, p, params);
      const TcGrid tok_vi = ivf::detail::block_tokens(vi, block, sel, p, params);
      const TcGrid attn = ivf::multi_head_cross_attention(
          params.wq.apply(tok_ir), params.wk.apply(tok_vi), params.wv.apply(tok_vi),
          cfg.heads);
      ivf::detail::write_back(upd, block, sel, p,
                              params.unembed.apply(ivf::detail::gated_update(tok_ir, attn, params)));
    }
    return upd;
  };
  const Clip fwd = run_order({0, 1, 2, 3});
  const Clip rev = run_order({3, 2, 0, 1});
  CHECK(fwd == rev);
}

TEST_CASE("forward pass is reproducible and shape preserving") {
  const Clip ir = random_clip(2, 4, 20, 12, 86);  // non-multiple sizes get padded
  const Clip vi = random_clip(2, 4, 20, 12, 87);
  const ivf::ScamConfig cfg = ivf::ScamConfig::stage(1);
  const ivf::ScamParams params = ivf::ScamParams::seeded(4, cfg, 88);
  const ivf::ScamLocalParams local = ivf::ScamLocalParams::seeded(4, 89);

  const Clip a = ivf::scam_forward(ir, vi, cfg, params, local);
  const Clip b = ivf::scam_forward(ir, vi, cfg, params, local);
  CHECK(a == b);
  CHECK(a.shape() == ir.shape());
  CHECK(a.all_finite());

  CHECK_THROWS_AS(
      ivf::scam_forward(ir, random_clip(2, 4, 20, 13, 90), cfg, params, local),
      ivf::DimensionError);
  CHECK_THROWS_AS(
      ivf::scam_forward(random_clip(2, 3, 20, 12, 91), random_clip(2, 3, 20, 12, 92),
                        cfg, params, local),
      ivf::DimensionError);
}

TEST_CASE("forward pass matches an unvectorized reference walk") {
  const int T = 2, C = 4, H = 16, W = 16, p = 8;
  const Clip ir = random_clip(T, C, H, W, 93);
  const Clip vi = random_clip(T, C, H, W, 94);
  ivf::ScamConfig cfg;
  cfg.block_size = p;
  cfg.sparse_ratio = 0.6;  // K = 2 of 4
  cfg.heads = 2;
  const ivf::ScamParams params = ivf::ScamParams::seeded(C, cfg, 95);
  const ivf::ScamLocalParams local = ivf::ScamLocalParams::seeded(C, 96);
  const int d = params.d;
  REQUIRE(d == 4);

  const Clip got = ivf::scam_forward(ir, vi, cfg, params, local);

  // ---- scores and selection ----
  const int bx_n = W / p, by_n = H / p, n_b = bx_n * by_n;
  std::vector<double> score(static_cast<std::size_t>(n_b), 0.0);
  for (int t = 0; t < T; ++t) {
    const int tp = t == 0 ? 0 : t - 1;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double s = 0.0;
        for (int c = 0; c < C; ++c) {
          const double a = ir.at(t, c, y, x);
          const double b = vi.at(t, c, y, x);
          s += std::fabs(a - ir.at(tp, c, y, x)) + std::fabs(b - vi.at(tp, c, y, x)) +
               0.5 * (std::fabs(a) + std::fabs(b)) + std::fabs(a - b);
        }
        score[static_cast<std::size_t>(y / p) * bx_n + (x / p)] += s / C;
      }
    }
  }
  for (auto& v : score) v /= static_cast<double>(T) * p * p;
  std::vector<int> order(static_cast<std::size_t>(n_b));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (score[static_cast<std::size_t>(a)] != score[static_cast<std::size_t>(b)]) {
      return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    }
    return a < b;
  });
  const int K = std::max(1, static_cast<int>(std::floor(cfg.sparse_ratio * n_b)));
  REQUIRE(K == 2);

  // ---- per-block attention and write-back ----
  const int rows = T * p * p;
  std::vector<double> upd_ir(static_cast<std::size_t>(T) * C * H * W);
  std::vector<double> upd_vi(upd_ir.size());
  const auto idx = [&](int t, int c, int y, int x) {
    return ((static_cast<std::size_t>(t) * C + c) * H + y) * W + x;
  };
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < C; ++c) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          upd_ir[idx(t, c, y, x)] = ir.at(t, c, y, x);
          upd_vi[idx(t, c, y, x)] = vi.at(t, c, y, x);
        }
      }
    }
  }

  const auto tokens_of = [&](const Clip& src, int block) {
    const int y0 = (block / bx_n) * p, x0 = (block % bx_n) * p;
    std::vector<std::vector<double>> tok(static_cast<std::size_t>(rows));
    const double cx = x0 + (p - 1) / 2.0, cy = y0 + (p - 1) / 2.0;
    for (int t = 0; t < T; ++t) {
      const std::vector<double> pe =
          pe_oracle(T > 1 ? static_cast<double>(t) / (T - 1) : 0.0, cx / W, cy / H, d);
      for (int yy = 0; yy < p; ++yy) {
        for (int xx = 0; xx < p; ++xx) {
          std::vector<double> raw(static_cast<std::size_t>(C));
          for (int c = 0; c < C; ++c) raw[static_cast<std::size_t>(c)] = src.at(t, c, y0 + yy, x0 + xx);
          std::vector<double> e = mat_apply(params.embed, raw);
          for (int j = 0; j < d; ++j) e[static_cast<std::size_t>(j)] += pe[static_cast<std::size_t>(j)];
          tok[static_cast<std::size_t>((t * p + yy) * p + xx)] = std::move(e);
        }
      }
    }
    return tok;
  };

  const auto attend = [&](const std::vector<std::vector<double>>& tq,
                          const std::vector<std::vector<double>>& tkv) {
    std::vector<std::vector<double>> q(tq.size()), k(tkv.size()), v(tkv.size());
    for (std::size_t i = 0; i < tq.size(); ++i) q[i] = mat_apply(params.wq, tq[i]);
    for (std::size_t i = 0; i < tkv.size(); ++i) {
      k[i] = mat_apply(params.wk, tkv[i]);
      v[i] = mat_apply(params.wv, tkv[i]);
    }
    const int dh = d / cfg.heads;
    std::vector<std::vector<double>> out(tq.size(), std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int h = 0; h < cfg.heads; ++h) {
      const int off = h * dh;
      for (std::size_t i = 0; i < tq.size(); ++i) {
        std::vector<double> logits(tkv.size());
        double m = -1e300;
        for (std::size_t j = 0; j < tkv.size(); ++j) {
          double dot = 0.0;
          for (int e = 0; e < dh; ++e) dot += q[i][static_cast<std::size_t>(off + e)] * k[j][static_cast<std::size_t>(off + e)];
          logits[j] = dot / std::sqrt(static_cast<double>(dh));
          m = std::max(m, logits[j]);
        }
        double total = 0.0;
        for (double& L : logits) {
          L = std::exp(L - m);
          total += L;
        }
        for (int e = 0; e < dh; ++e) {
          double acc = 0.0;
          for (std::size_t j = 0; j < tkv.size(); ++j) acc += logits[j] / total * v[j][static_cast<std::size_t>(off + e)];
          out[i][static_cast<std::size_t>(off + e)] = acc;
        }
      }
    }
    return out;
  };

  const auto update_and_write = [&](std::vector<double>& dst, const Clip& src, int block,
                                    const std::vector<std::vector<double>>& tkv_src) {
    const auto tok = tokens_of(src, block);
    const auto attn = attend(tok, tkv_src);
    const int y0 = (block / bx_n) * p, x0 = (block % bx_n) * p;
    for (int row = 0; row < rows; ++row) {
      const auto g = mat_apply(params.gate, attn[static_cast<std::size_t>(row)]);
      std::vector<double> r(static_cast<std::size_t>(d));
      for (int j = 0; j < d; ++j) {
        r[static_cast<std::size_t>(j)] =
            tok[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)] +
            1.0 / (1.0 + std::exp(-g[static_cast<std::size_t>(j)])) *
                attn[static_cast<std::size_t>(row)][static_cast<std::size_t>(j)];
      }
      auto hid = mat_apply(params.ffn1, r);
      for (double& v : hid) v = v > 0.0 ? v : 0.0;
      const auto f = mat_apply(params.ffn2, hid);
      for (int j = 0; j < d; ++j) r[static_cast<std::size_t>(j)] += f[static_cast<std::size_t>(j)];
      const auto back = mat_apply(params.unembed, r);
      const int t = row / (p * p);
      const int yy = (row / p) % p;
      const int xx = row % p;
      for (int c = 0; c < C; ++c) {
        dst[idx(t, c, y0 + yy, x0 + xx)] = back[static_cast<std::size_t>(c)];
      }
    }
  };

  for (int i = 0; i < K; ++i) {
    const int block = order[static_cast<std::size_t>(i)];
    const auto tok_ir = tokens_of(ir, block);
    const auto tok_vi = tokens_of(vi, block);
    update_and_write(upd_ir, ir, block, tok_vi);
    update_and_write(upd_vi, vi, block, tok_ir);
  }

  // ---- local branch ----
  const auto cl = [](int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); };
  const auto local_branch = [&](const Clip& src, const ivf::DepthwiseConv3d& dw,
                                const ivf::PointwiseMap& pw) {
    std::vector<double> mid(static_cast<std::size_t>(T) * C * H * W);
    for (int t = 0; t < T; ++t) {
      for (int c = 0; c < C; ++c) {
        for (int y = 0; y < H; ++y) {
          for (int x = 0; x < W; ++x) {
            double acc = dw.bias[static_cast<std::size_t>(c)];
            for (int dt = -1; dt <= 1; ++dt) {
              for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                  acc += static_cast<double>(
                             dw.w[((static_cast<std::size_t>(c) * 3 + (dt + 1)) * 3 + (dy + 1)) * 3 +
                                  (dx + 1)]) *
                         src.at(cl(t + dt, T), c, cl(y + dy, H), cl(x + dx, W));
                }
              }
            }
            mid[idx(t, c, y, x)] = acc;
          }
        }
      }
    }
    std::vector<double> out(mid.size());
    for (int t = 0; t < T; ++t) {
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
          for (int o = 0; o < C; ++o) {
            double acc = pw.bias[static_cast<std::size_t>(o)];
            for (int c = 0; c < C; ++c) {
              acc += static_cast<double>(pw.w[static_cast<std::size_t>(o) * C + c]) * mid[idx(t, c, y, x)];
            }
            out[idx(t, o, y, x)] = acc;
          }
        }
      }
    }
    return out;
  };
  const auto loc_ir = local_branch(ir, local.dw_ir, local.pw_ir);
  const auto loc_vi = local_branch(vi, local.dw_vi, local.pw_vi);
  for (std::size_t i = 0; i < upd_ir.size(); ++i) {
    upd_ir[i] += loc_ir[i];
    upd_vi[i] += loc_vi[i];
  }

  // ---- fusion gate ----
  for (int t = 0; t < T; ++t) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        std::vector<double> cat(static_cast<std::size_t>(2 * C));
        for (int c = 0; c < C; ++c) {
          cat[static_cast<std::size_t>(c)] = upd_ir[idx(t, c, y, x)];
          cat[static_cast<std::size_t>(C + c)] = upd_vi[idx(t, c, y, x)];
        }
        const auto logits = mat_apply(params.fuse_gate, cat);
        for (int c = 0; c < C; ++c) {
          const double g = 1.0 / (1.0 + std::exp(-logits[static_cast<std::size_t>(c)]));
          const double want = g * upd_ir[idx(t, c, y, x)] + (1.0 - g) * upd_vi[idx(t, c, y, x)];
          CHECK_THAT(got.at(t, c, y, x), Catch::Matchers::WithinAbs(want, 1e-5));
        }
      }
    }
  }
}
