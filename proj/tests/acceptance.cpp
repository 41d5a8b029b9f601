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

// End-to-end acceptance checks for the library and the CLI. Each check
// prints exactly one PASS/FAIL line; the exit code is nonzero if any fail.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/freq.hpp"
#include "ivf/io.hpp"
#include "ivf/lowfreq.hpp"
#include "ivf/metrics.hpp"
#include "ivf/perturb.hpp"
#include "ivf/rng.hpp"
#include "ivf/scam.hpp"
#include "ivf/stressbench.hpp"
#include "ivf/synth.hpp"
#include "ivf/tcloss.hpp"
#include "ivf/video_core.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Collects the first failure message of one acceptance check.
struct Check {
  bool ok = true;
  std::string why;

  void expect(bool cond, const std::string& msg) {
    if (!cond && ok) {
      ok = false;
      why = msg;
    }
  }
};

std::string fmt(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

ivf::Clip random_clip(int t, int c, int h, int w, ivf::Rng& rng, float lo, float hi) {
  ivf::Clip clip(t, c, h, w);
  for (float& v : clip.raw()) v = static_cast<float>(rng.uniform(lo, hi));
  return clip;
}

// ---------------------------------------------------------------------------
// 1. Frequency split reconstructs the input.
// ---------------------------------------------------------------------------

Check check_reconstruction() {
  Check c;
  ivf::Rng rng(4101);
  double max_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int t = static_cast<int>(rng.uniform_int(2, 8));
    const int ch = rng.uniform01() < 0.5 ? 1 : 4;
    const int h = static_cast<int>(rng.uniform_int(8, 64));
    const int w = static_cast<int>(rng.uniform_int(8, 64));
    const ivf::Clip clip = random_clip(t, ch, h, w, rng, -1.0f, 2.0f);
    ivf::DecompWeights weights;
    for (double& l : weights.logits) l = rng.uniform(-2.0, 2.0);
    const ivf::FreqPair pair = ivf::decompose(clip, weights);
    for (std::size_t j = 0; j < clip.shape().elements(); ++j) {
      const double err = std::fabs(static_cast<double>(clip.raw()[j]) -
                                   (static_cast<double>(pair.low.raw()[j]) +
                                    static_cast<double>(pair.high.raw()[j])));
      max_err = std::max(max_err, err);
    }
  }
  c.expect(max_err < 1e-6, "max reconstruction error " + fmt(max_err));
  return c;
}

// ---------------------------------------------------------------------------
// 2. Low-frequency enhancement preserves the temporal mean.
// ---------------------------------------------------------------------------

Check check_mean_preservation() {
  Check c;
  ivf::Rng rng(4102);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int t = static_cast<int>(rng.uniform_int(2, 6));
    const int ch = static_cast<int>(rng.uniform_int(1, 4));
    const int h = static_cast<int>(rng.uniform_int(6, 24));
    const int w = static_cast<int>(rng.uniform_int(6, 24));
    const ivf::Clip low = random_clip(t, ch, h, w, rng, -1.0f, 1.0f);
    const ivf::LfpmParams params = ivf::LfpmParams::seeded(ch, rng.next_u64());
    const ivf::Clip lhat = ivf::lfpm_forward(low, params, rng.next_u64());
    for (int cc = 0; cc < ch; ++cc) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double m_in = 0.0, m_out = 0.0;
          for (int tt = 0; tt < t; ++tt) {
            m_in += low.at(tt, cc, y, x);
            m_out += lhat.at(tt, cc, y, x);
          }
          worst = std::max(worst, std::fabs(m_out - m_in) / t);
        }
      }
    }
  }
  c.expect(worst < 1e-5, "max temporal-mean drift " + fmt(worst));
  return c;
}

// ---------------------------------------------------------------------------
// 3. Sparse attention structural invariants.
// ---------------------------------------------------------------------------

Check check_attention_invariants() {
  Check c;
  ivf::Rng rng(4103);
  const int block_sizes[3] = {2, 4, 8};
  const int head_counts[3] = {1, 2, 4};
  for (int i = 0; i < 50 && c.ok; ++i) {
    const int ch = static_cast<int>(rng.uniform_int(1, 5));
    ivf::ScamConfig cfg;
    cfg.block_size = block_sizes[rng.uniform_int(0, 2)];
    cfg.heads = head_counts[rng.uniform_int(0, 2)];
    cfg.sparse_ratio = rng.uniform(0.05, 1.0);
    const int t = static_cast<int>(rng.uniform_int(1, 3));
    const int h = static_cast<int>(rng.uniform_int(5, 20));
    const int w = static_cast<int>(rng.uniform_int(5, 20));
    const ivf::Clip h_ir = random_clip(t, ch, h, w, rng, -1.0f, 1.0f);
    const ivf::Clip h_vi = random_clip(t, ch, h, w, rng, -1.0f, 1.0f);
    const ivf::ScamParams params = ivf::ScamParams::seeded(ch, cfg, rng.next_u64());
    const ivf::ScamLocalParams local = ivf::ScamLocalParams::seeded(ch, rng.next_u64());

    ivf::ScamTrace trace;
    ivf::scam_forward(h_ir, h_vi, cfg, params, local, &trace);
    const ivf::BlockSelection& sel = trace.selection;
    const int n_b = sel.blocks_x * sel.blocks_y;

    // Selection count and order against a brute-force sort oracle.
    const int want_k = std::max(1, static_cast<int>(std::floor(cfg.sparse_ratio * n_b)));
    c.expect(sel.k == want_k, "config " + std::to_string(i) + ": k=" +
                                  std::to_string(sel.k) + " want " + std::to_string(want_k));
    std::vector<int> order(sel.scores.size());
    for (std::size_t b = 0; b < order.size(); ++b) order[b] = static_cast<int>(b);
    std::stable_sort(order.begin(), order.end(), [&sel](int a, int b) {
      if (sel.scores[static_cast<std::size_t>(a)] != sel.scores[static_cast<std::size_t>(b)]) {
        return sel.scores[static_cast<std::size_t>(a)] > sel.scores[static_cast<std::size_t>(b)];
      }
      return a < b;
    });
    for (int b = 0; b < sel.k && c.ok; ++b) {
      c.expect(sel.selected[static_cast<std::size_t>(b)] == order[static_cast<std::size_t>(b)],
               "config " + std::to_string(i) + ": selection order differs from sort oracle");
    }

    // Unselected blocks pass through the attention stage bitwise unchanged.
    std::set<int> chosen(sel.selected.begin(), sel.selected.end());
    for (int b = 0; b < n_b && c.ok; ++b) {
      if (chosen.count(b)) continue;
      const int by = b / sel.blocks_x, bx = b % sel.blocks_x;
      const int p = cfg.block_size;
      for (int tt = 0; tt < t && c.ok; ++tt) {
        for (int cc = 0; cc < ch && c.ok; ++cc) {
          for (int y = by * p; y < std::min((by + 1) * p, h) && c.ok; ++y) {
            for (int x = bx * p; x < std::min((bx + 1) * p, w); ++x) {
              if (trace.attn_ir.at(tt, cc, y, x) != h_ir.at(tt, cc, y, x) ||
                  trace.attn_vi.at(tt, cc, y, x) != h_vi.at(tt, cc, y, x)) {
                c.expect(false, "config " + std::to_string(i) + ": unselected block " +
                                    std::to_string(b) + " modified before local branch");
                break;
              }
            }
          }
        }
      }
    }

    // Attention rows are normalized for this configuration's head layout.
    const int d = cfg.attn_dim(ch);
    const int n_q = static_cast<int>(rng.uniform_int(1, 12));
    const int n_k = static_cast<int>(rng.uniform_int(1, 12));
    ivf::TcGrid q(n_q, d), k(n_k, d), v(n_k, d);
    for (float& x : q.v) x = static_cast<float>(rng.gaussian());
    for (float& x : k.v) x = static_cast<float>(rng.gaussian());
    for (float& x : v.v) x = static_cast<float>(rng.gaussian());
    std::vector<ivf::TcGrid> probs;
    ivf::multi_head_cross_attention(q, k, v, cfg.heads, &probs);
    for (const ivf::TcGrid& head : probs) {
      for (int row = 0; row < head.t && c.ok; ++row) {
        double s = 0.0;
        for (int col = 0; col < head.c; ++col) s += head.at(row, col);
        c.expect(std::fabs(s - 1.0) < 1e-5,
                 "config " + std::to_string(i) + ": attention row sums to " + fmt(s));
      }
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// 4. Shift estimator recovers known integer translations.
// ---------------------------------------------------------------------------

Check check_shift_recovery() {
  Check c;
  ivf::Rng rng(4104);
  const int side = 40;
  for (int i = 0; i < 50 && c.ok; ++i) {
    const ivf::Plane base = ivf::synth_textured_frame(side, side, rng);
    const int du = static_cast<int>(rng.uniform_int(-2, 2));
    const int dv = static_cast<int>(rng.uniform_int(-2, 2));
    ivf::Clip pair(2, 1, side, side);
    pair.set_plane(0, 0,
                   ivf::integer_shift(ivf::PlaneRef{base.v.data(), side, side}, du, dv));
    pair.set_plane(1, 0, base);
    const ivf::Clip norm = ivf::normalize_frames(pair);
    const ivf::OffsetEstimate est = ivf::estimate_shift(norm.plane(0, 0), norm.plane(1, 0));
    c.expect(std::fabs(est.u - du) < 0.25 && std::fabs(est.v - dv) < 0.25,
             "frame " + std::to_string(i) + ": estimate (" + fmt(est.u) + "," + fmt(est.v) +
                 ") for truth (" + std::to_string(du) + "," + std::to_string(dv) + ")");
    int best = 0;
    for (int j = 1; j < 25; ++j) {
      if (est.distribution[static_cast<std::size_t>(j)] >
          est.distribution[static_cast<std::size_t>(best)]) {
        best = j;
      }
    }
    c.expect(best % 5 - 2 == du && best / 5 - 2 == dv,
             "frame " + std::to_string(i) + ": argmax misses the true offset");
  }
  return c;
}

// ---------------------------------------------------------------------------
// 5. Temporal-consistency loss vanishes on static identical clips.
// ---------------------------------------------------------------------------

Check check_loss_zero_case() {
  Check c;
  ivf::Rng rng(4105);
  const ivf::Plane frame = ivf::synth_textured_frame(24, 24, rng);
  ivf::Clip clip(4, 1, 24, 24);
  for (int t = 0; t < 4; ++t) clip.set_plane(t, 0, frame);
  const ivf::TcBreakdown b = ivf::tc_loss(clip, clip, clip);
  c.expect(std::fabs(b.l_shift) < 1e-6, "l_shift " + fmt(b.l_shift));
  c.expect(std::fabs(b.l_align - 1e-3) < 1e-6, "l_align " + fmt(b.l_align));
  c.expect(std::fabs(b.l_grad - 1e-3) < 1e-6, "l_grad " + fmt(b.l_grad));
  return c;
}

// ---------------------------------------------------------------------------
// 6. Loss grows with noise on the fused clip.
// ---------------------------------------------------------------------------

Check check_loss_monotonicity() {
  Check c;
  const double levels[5] = {0.0, 0.02, 0.05, 0.1, 0.2};
  for (int i = 0; i < 20; ++i) {
    const ivf::Clip base = ivf::synth_textured_clip(5, 1, 24, 24, 4200 + i);
    ivf::Rng rng(5200 + i);
    ivf::Clip noise(base.shape());
    for (float& v : noise.raw()) v = static_cast<float>(rng.gaussian());
    double prev = 0.0;
    int inversions = 0;
    for (int l = 0; l < 5; ++l) {
      ivf::Clip fused = base;
      for (std::size_t j = 0; j < fused.shape().elements(); ++j) {
        fused.raw()[j] += static_cast<float>(levels[l]) * noise.raw()[j];
      }
      const double total = ivf::tc_loss(fused, base, base).total;
      if (l > 0 && total < prev) ++inversions;
      prev = total;
    }
    c.expect(inversions <= 1,
             "clip " + std::to_string(i) + ": " + std::to_string(inversions) + " inversions");
  }
  return c;
}

// ---------------------------------------------------------------------------
// 7. Mixing-continuity index endpoints.
// ---------------------------------------------------------------------------

Check check_mixing_endpoints() {
  Check c;
  ivf::Rng rng(4107);

  // Fused equal to the visible source.
  {
    const ivf::Clip vi = random_clip(4, 3, 20, 24, rng, 0.0f, 1.0f);
    ivf::Clip ir = vi;
    for (float& v : ir.raw()) v += 0.5f;
    c.expect(ivf::mmci(ir, vi, vi).value == 0.0, "fused==vi score is nonzero");
  }

  // Fused equal to the infrared source, sources everywhere distinct.
  {
    const ivf::Clip vi = random_clip(5, 1, 18, 22, rng, 0.0f, 1.0f);
    ivf::Clip ir = vi;
    for (float& v : ir.raw()) v += 2.0f;
    c.expect(ivf::mmci(ir, vi, ir).value == 0.0, "fused==ir score is nonzero");
  }

  // Frame-alternating blend beats every constant blend.
  {
    const int t_n = 6, h = 16, w = 18;
    const ivf::Plane frame = ivf::synth_textured_frame(h, w, rng);
    ivf::Clip vi(t_n, 1, h, w);
    for (int t = 0; t < t_n; ++t) vi.set_plane(t, 0, frame);
    ivf::Clip ir = vi;
    for (float& v : ir.raw()) v += 2.0f;
    ivf::Clip alternating = vi;
    for (int t = 1; t < t_n; t += 2) alternating.copy_plane(t, 0, ir, t, 0);
    const double alt = ivf::mmci(ir, vi, alternating).value;
    for (double beta : {0.0, 0.25, 0.5, 0.75, 1.0}) {
      ivf::Clip blend(vi.shape());
      for (std::size_t j = 0; j < blend.shape().elements(); ++j) {
        blend.raw()[j] = static_cast<float>(beta * ir.raw()[j] + (1.0 - beta) * vi.raw()[j]);
      }
      const double con = ivf::mmci(ir, vi, blend).value;
      c.expect(alt > con, "alternating " + fmt(alt) + " not above constant blend " +
                              fmt(con) + " at beta " + fmt(beta));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// 8. Trajectory-preservation metric endpoints.
// ---------------------------------------------------------------------------

Check check_trajectory_endpoints() {
  Check c;
  ivf::Rng rng(4108);

  // Fused equal to the reference: every pixel of every window scores zero.
  {
    const ivf::Clip ir = random_clip(6, 1, 20, 22, rng, 0.0f, 1.0f);
    const ivf::Clip vi = random_clip(6, 1, 20, 22, rng, 0.0f, 1.0f);
    ivf::TcpeConfig cfg;
    cfg.weight_override = 1.0;
    const ivf::TcpeResult res = ivf::tcpe(ir, vi, ir, cfg);
    c.expect(res.value == 0.0, "fused==ir score " + fmt(res.value));
    for (float e : res.e_maps.raw()) {
      if (e != 0.0f) {
        c.expect(false, "fused==ir error map has entry " + fmt(e));
        break;
      }
    }
  }

  // Temporal reversal of a ramped-contrast clip scores exactly one.
  {
    const int t_n = 5, h = 20, w = 22;
    ivf::Clip ir(t_n, 1, h, w);
    for (int t = 0; t < t_n; ++t) {
      const float gain = 1.0f + 0.4f * static_cast<float>(t);
      float* p = ir.plane_data(t, 0);
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          p[y * w + x] = gain * (0.5f + 0.3f * static_cast<float>((x + y) % 2));
        }
      }
    }
    ivf::Clip fused(ir.shape());
    for (int t = 0; t < t_n; ++t) fused.copy_plane(t, 0, ir, t_n - 1 - t, 0);
    const ivf::Clip vi = random_clip(t_n, 1, h, w, rng, 0.0f, 1.0f);
    ivf::TcpeConfig cfg;
    cfg.weight_override = 1.0;
    const ivf::TcpeResult res = ivf::tcpe(ir, vi, fused, cfg);
    c.expect(std::fabs(res.value - 1.0) < 1e-12, "reversal score " + fmt(res.value));
    for (float e : res.e_maps.raw()) {
      if (e != 1.0f) {
        c.expect(false, "reversal error map has entry " + fmt(e));
        break;
      }
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// 9. Stress bench ranks the metrics as designed.
// ---------------------------------------------------------------------------

Check check_bench_direction() {
  Check c;
  const std::vector<ivf::ClipTriple> corpus = ivf::synth_bench_corpus(10, 32, 64, 64, 777);
  const std::vector<ivf::PerturbFamily> families = {ivf::PerturbFamily::kTemporalShuffle,
                                                    ivf::PerturbFamily::kModalityDrift};
  const ivf::BenchTable table = ivf::run_bench(corpus, families, ivf::default_bench_levels(),
                                               ivf::default_metrics(), 31);
  std::map<std::pair<std::string, std::string>, double> spearman;
  for (const ivf::BenchRow& row : table.rows) {
    spearman[{row.family, row.metric}] = row.stats.global_spearman;
  }
  const double tcpe_shuffle = spearman[{"temporal_shuffle", "TCPE"}];
  const double mmci_shuffle = spearman[{"temporal_shuffle", "MMCI"}];
  const double mmci_drift = spearman[{"modality_drift", "MMCI"}];
  c.expect(tcpe_shuffle > mmci_shuffle, "shuffle: TCPE " + fmt(tcpe_shuffle) +
                                            " not above MMCI " + fmt(mmci_shuffle));
  c.expect(tcpe_shuffle >= 0.8, "shuffle: TCPE spearman " + fmt(tcpe_shuffle));
  c.expect(mmci_drift >= 0.9, "drift: MMCI spearman " + fmt(mmci_drift));
  return c;
}

// ---------------------------------------------------------------------------
// 10. Temporal energy shifts toward the low band under corruption.
// ---------------------------------------------------------------------------

Check check_energy_direction() {
  Check c;
  const std::vector<double> strengths = {0.0, 0.75, 1.5, 2.25, 3.0};
  const int n_clips = 4;
  std::vector<double> fli_r(strengths.size(), 0.0), mis_r(strengths.size(), 0.0);
  bool eta_ordered = true;
  for (int i = 0; i < n_clips; ++i) {
    const ivf::Clip clip = ivf::synth_energy_clip(8, 1, 24, 24, 4240 + i);
    const auto fli = ivf::energy_sweep(clip, nullptr, ivf::PerturbFamily::kFlicker,
                                       9000 + i, strengths);
    const auto mis = ivf::energy_sweep(clip, nullptr, ivf::PerturbFamily::kLocalMisalignment,
                                       9000 + i, strengths);
    for (std::size_t l = 0; l < strengths.size(); ++l) {
      fli_r[l] += fli[l].r_low / n_clips;
      mis_r[l] += mis[l].r_low / n_clips;
      eta_ordered = eta_ordered && fli[l].eta_low > fli[l].eta_high;
    }
  }
  for (std::size_t l = 0; l + 1 < strengths.size(); ++l) {
    c.expect(fli_r[l + 1] > fli_r[l], "flicker r_low not increasing at level " +
                                          std::to_string(l + 1) + ": " + fmt(fli_r[l]) +
                                          " -> " + fmt(fli_r[l + 1]));
    c.expect(mis_r[l + 1] > mis_r[l], "misalignment r_low not increasing at level " +
                                          std::to_string(l + 1) + ": " + fmt(mis_r[l]) +
                                          " -> " + fmt(mis_r[l + 1]));
  }
  c.expect(mis_r.back() > fli_r.back(), "final misalignment r_low " + fmt(mis_r.back()) +
                                            " not above flicker " + fmt(fli_r.back()));
  c.expect(eta_ordered, "low-band sensitivity not above high-band at some flicker level");
  return c;
}

// ---------------------------------------------------------------------------
// 11. Rank statistics match brute-force oracles.
// ---------------------------------------------------------------------------

std::vector<double> oracle_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    int less = 0, equal = 0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (v[j] < v[i]) ++less;
      if (v[j] == v[i]) ++equal;
    }
    r[i] = static_cast<double>(less) + (static_cast<double>(equal) + 1.0) / 2.0;
  }
  return r;
}

double oracle_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va <= 0.0 || vb <= 0.0) return 0.0;
  return std::clamp(cov / std::sqrt(va * vb), -1.0, 1.0);
}

ivf::RankStats oracle_rank_stats(std::vector<std::vector<double>> m,
                                 ivf::MetricDirection dir) {
  if (dir == ivf::MetricDirection::kHigherBetter) {
    for (auto& row : m) {
      for (auto& v : row) v = -v;
    }
  }
  const std::size_t seqs = m.size(), levels = m.front().size();
  std::vector<double> pooled, pooled_lv;
  for (const auto& row : m) {
    for (std::size_t l = 0; l < levels; ++l) {
      pooled.push_back(row[l]);
      pooled_lv.push_back(static_cast<double>(l));
    }
  }
  ivf::RankStats st;
  st.global_spearman = oracle_pearson(oracle_ranks(pooled), oracle_ranks(pooled_lv));
  st.global_pearson = oracle_pearson(pooled, pooled_lv);
  std::vector<double> lv(levels);
  for (std::size_t l = 0; l < levels; ++l) lv[l] = static_cast<double>(l);
  double sp = 0, mono = 0, pc = 0, pt = 0;
  for (const auto& row : m) {
    sp += oracle_pearson(oracle_ranks(row), oracle_ranks(lv));
    bool strict = true;
    for (std::size_t l = 0; l + 1 < levels; ++l) strict = strict && row[l + 1] > row[l];
    mono += strict ? 1.0 : 0.0;
    for (std::size_t i = 0; i < levels; ++i) {
      for (std::size_t j = i + 1; j < levels; ++j) {
        pt += 1.0;
        if (row[j] > row[i]) pc += 1.0;
        else if (row[j] == row[i]) pc += 0.5;
      }
    }
  }
  st.mean_seq_spearman = sp / static_cast<double>(seqs);
  st.monotonic_rate = mono / static_cast<double>(seqs);
  st.pairwise_acc = pc / pt;
  double sep = 0;
  for (std::size_t l = 0; l + 1 < levels; ++l) {
    double m0 = 0, m1 = 0;
    for (const auto& row : m) {
      m0 += row[l];
      m1 += row[l + 1];
    }
    m0 /= static_cast<double>(seqs);
    m1 /= static_cast<double>(seqs);
    double v0 = 0, v1 = 0;
    for (const auto& row : m) {
      v0 += (row[l] - m0) * (row[l] - m0);
      v1 += (row[l + 1] - m1) * (row[l + 1] - m1);
    }
    v0 /= static_cast<double>(seqs);
    v1 /= static_cast<double>(seqs);
    const double sd = std::sqrt(0.5 * (v0 + v1));
    if (sd > 1e-12 && m1 - m0 > 0.0) sep += (m1 - m0) / sd;
  }
  st.adjacent_sep = sep / static_cast<double>(levels - 1);
  return st;
}

Check check_rank_stats() {
  Check c;
  ivf::Rng rng(4111);
  for (int i = 0; i < 1000 && c.ok; ++i) {
    const std::size_t seqs = static_cast<std::size_t>(rng.uniform_int(1, 6));
    const std::size_t levels = static_cast<std::size_t>(rng.uniform_int(2, 6));
    std::vector<std::vector<double>> m(seqs, std::vector<double>(levels));
    const bool coarse = i % 3 == 0;
    for (auto& row : m) {
      for (double& v : row) {
        v = coarse ? static_cast<double>(rng.uniform_int(0, 3)) : rng.uniform(-5.0, 5.0);
      }
    }
    const ivf::MetricDirection dir = i % 2 == 0 ? ivf::MetricDirection::kLowerBetter
                                                : ivf::MetricDirection::kHigherBetter;
    const ivf::RankStats got = ivf::rank_stats(m, dir);
    const ivf::RankStats want = oracle_rank_stats(m, dir);
    const std::pair<double, double> fields[6] = {
        {got.global_spearman, want.global_spearman},
        {got.global_pearson, want.global_pearson},
        {got.mean_seq_spearman, want.mean_seq_spearman},
        {got.monotonic_rate, want.monotonic_rate},
        {got.pairwise_acc, want.pairwise_acc},
        {got.adjacent_sep, want.adjacent_sep},
    };
    for (const auto& [a, b] : fields) {
      c.expect(std::fabs(a - b) < 1e-9, "matrix " + std::to_string(i) + ": " + fmt(a) +
                                            " vs oracle " + fmt(b));
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// 12. Every CLI subcommand is byte-reproducible for a fixed seed.
// ---------------------------------------------------------------------------

int run_cli(const std::string& cli, const std::string& args, const fs::path& stdout_path) {
  const std::string cmd =
      "\"" + cli + "\" " + args + " > \"" + stdout_path.string() + "\" 2> /dev/null";
  const int rc = std::system(cmd.c_str());
  if (rc == -1 || !WIFEXITED(rc)) return -1;
  return WEXITSTATUS(rc);
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

// Relative path -> content for every regular file under root.
std::map<std::string, std::vector<char>> tree_contents(const fs::path& root) {
  std::map<std::string, std::vector<char>> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (entry.is_regular_file()) {
      out[fs::relative(entry.path(), root).string()] = slurp(entry.path());
    }
  }
  return out;
}

Check check_cli_determinism() {
  Check c;
  const char* cli_env = std::getenv("IVF_CLI_PATH");
  if (cli_env == nullptr) {
    c.expect(false, "IVF_CLI_PATH not set");
    return c;
  }
  const std::string cli = cli_env;

  char tmpl[] = "/tmp/ivf_accept_XXXXXX";
  if (mkdtemp(tmpl) == nullptr) {
    c.expect(false, "mkdtemp failed");
    return c;
  }
  const fs::path root(tmpl);

  // Shared seeded inputs, generated once.
  const fs::path inputs = root / "inputs";
  fs::create_directories(inputs);
  const std::vector<std::pair<std::string, std::string>> prep = {
      {"--seed 1 synth --kind textured --frames 5 --height 16 --width 16", (inputs / "ir").string()},
      {"--seed 2 synth --kind textured --frames 5 --height 16 --width 16", (inputs / "vi").string()},
      {"--seed 3 synth --kind textured --frames 5 --height 16 --width 16", (inputs / "fused").string()},
      {"--seed 4 synth --kind energy --frames 6 --height 16 --width 16", (inputs / "energy").string()},
  };
  for (const auto& [args, out] : prep) {
    if (run_cli(cli, args + " --out \"" + out + "\"", root / "prep_stdout") != 0) {
      c.expect(false, "input generation failed: " + args);
      fs::remove_all(root);
      return c;
    }
  }
  const std::string ir = (inputs / "ir").string();
  const std::string vi = (inputs / "vi").string();
  const std::string fused = (inputs / "fused").string();
  const std::string energy = (inputs / "energy").string();

  // Each entry writes all of its outputs under {out}; stdout is captured too.
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"synth", "--seed 7 synth --kind bench --count 2 --frames 5 --height 12 --width 12 --out \"{out}/corpus\""},
      {"decompose", "--seed 7 decompose --in \"" + ir + "\" --out \"{out}/dec\" --logits 0.2,-0.1,0.4"},
      {"dfam-forward", "--seed 7 dfam-forward --ir \"" + ir + "\" --vi \"" + vi +
                           "\" --out \"{out}/dfam\" --dump-selection --dump-lf"},
      {"tcloss", "--seed 7 tcloss --fused \"" + fused + "\" --vi \"" + vi + "\" --ir \"" + ir +
                     "\" --json --out \"{out}/tc.json\""},
      {"metrics", "--seed 7 metrics --ir \"" + ir + "\" --vi \"" + vi + "\" --fused \"" + fused +
                      "\" --which both --out \"{out}/metrics.json\" --dump-maps \"{out}/maps\""},
      {"perturb", "--seed 7 perturb --in \"" + fused +
                      "\" --family mixed_hard --strength 1.5 --out \"{out}/pert\" --log "
                      "\"{out}/pert_log.json\""},
      {"freq-analysis", "--seed 7 freq-analysis --in \"" + energy +
                            "\" --family flicker --strengths 0,1,2 --out \"{out}/freq.csv\""},
      {"stressbench",
       "--seed 7 stressbench --synthetic 2 --frames 6 --height 16 --width 16 --out "
       "\"{out}/bench.json\""},
  };

  for (const auto& [name, templ] : runs) {
    std::array<std::map<std::string, std::vector<char>>, 2> trees;
    for (int rep = 0; rep < 2 && c.ok; ++rep) {
      const fs::path dir = root / (name + "_" + std::to_string(rep));
      fs::create_directories(dir);
      std::string args = templ;
      std::string::size_type pos;
      while ((pos = args.find("{out}")) != std::string::npos) {
        args.replace(pos, 5, dir.string());
      }
      const int rc = run_cli(cli, args, dir / "_stdout");
      c.expect(rc == 0, name + " exited with code " + std::to_string(rc));
      if (c.ok) trees[static_cast<std::size_t>(rep)] = tree_contents(dir);
    }
    if (c.ok) {
      c.expect(!trees[0].empty(), name + " produced no output");
      c.expect(trees[0] == trees[1], name + " outputs differ between identical runs");
    }
  }
  fs::remove_all(root);
  return c;
}

// ---------------------------------------------------------------------------

struct Criterion {
  const char* name;
  Check (*fn)();
  double limit_s;  // 0 means no runtime bound
};

}  // namespace

int main() {
  const Criterion criteria[] = {
      {"frequency split reconstructs the input", check_reconstruction, 10.0},
      {"low-frequency enhancement preserves the temporal mean", check_mean_preservation, 0.0},
      {"sparse attention structural invariants", check_attention_invariants, 0.0},
      {"shift estimator recovers integer translations", check_shift_recovery, 5.0},
      {"consistency loss vanishes on static identical clips", check_loss_zero_case, 0.0},
      {"consistency loss grows with fused-clip noise", check_loss_monotonicity, 0.0},
      {"mixing-continuity index endpoints", check_mixing_endpoints, 0.0},
      {"trajectory-preservation metric endpoints", check_trajectory_endpoints, 0.0},
      {"stress bench separates the metrics by corruption family", check_bench_direction, 120.0},
      {"corruption shifts temporal energy into the low band", check_energy_direction, 60.0},
      {"rank statistics match brute-force oracles", check_rank_stats, 0.0},
      {"CLI subcommands are byte-reproducible", check_cli_determinism, 0.0},
  };

  int failures = 0;
  int idx = 0;
  for (const Criterion& cr : criteria) {
    ++idx;
    const auto start = Clock::now();
    Check check = cr.fn();
    const double elapsed =
        std::chrono::duration_cast<std::chrono::duration<double>>(Clock::now() - start)
            .count();
    if (cr.limit_s > 0.0 && elapsed > cr.limit_s && check.ok) {
      check.ok = false;
      check.why = "took " + fmt(elapsed) + " s, limit " + fmt(cr.limit_s) + " s";
    }
    char line[256];
    std::snprintf(line, sizeof(line), "%s %2d. %s (%.2f s)%s%s",
                  check.ok ? "PASS" : "FAIL", idx, cr.name, elapsed,
                  check.ok ? "" : ": ", check.ok ? "" : check.why.c_str());
    std::puts(line);
    if (!check.ok) ++failures;
  }
  if (failures > 0) {
    std::printf("%d of 12 acceptance checks failed\n", failures);
    return 1;
  }
  std::puts("all 12 acceptance checks passed");
  return 0;
}
