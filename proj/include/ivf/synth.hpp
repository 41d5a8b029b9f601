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

// Seeded synthetic clip generators for tests, benchmarks, and demo corpora.
// Every generator is a pure function of its seed.

#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/rng.hpp"
#include "ivf/stressbench.hpp"
#include "ivf/video_core.hpp"

namespace ivf {

// Smooth random field in [lo, hi]: white noise blurred at scale sigma, then
// min-max normalized. Degenerate (constant) fields map to the midpoint.
inline Plane synth_smooth_field(int h, int w, double sigma, Rng& rng, float lo = 0.0f,
                                float hi = 1.0f) {
  Plane p(h, w);
  for (auto& x : p.v) x = static_cast<float>(rng.uniform01());
  const int k = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
  p = convolve_replicate(p, Kernel2D::gaussian(k, sigma));
  float mn = p.v[0], mx = p.v[0];
  for (float x : p.v) {
    mn = std::min(mn, x);
    mx = std::max(mx, x);
  }
  const float span = mx - mn;
  for (auto& x : p.v) {
    const float t = span > 0.0f ? (x - mn) / span : 0.5f;
    x = lo + t * (hi - lo);
  }
  return p;
}

// Texture-rich frame: large smooth blobs, mid-scale ripple, and per-pixel
// grain. The grain share keeps the normalized one-pixel structure difference
// large, which block matching needs to localize its soft estimate.
inline Plane synth_textured_frame(int h, int w, Rng& rng) {
  const Plane blobs = synth_smooth_field(h, w, 5.0, rng);
  const Plane ripple = synth_smooth_field(h, w, 1.5, rng);
  Plane out(h, w);
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    const float grain = static_cast<float>(rng.uniform01());
    out.v[i] = 0.1f + 0.3f * blobs.v[i] + 0.2f * ripple.v[i] + 0.4f * grain;
  }
  return out;
}

// Static textured clip: one textured frame per channel, repeated over time.
inline Clip synth_textured_clip(int t, int c, int h, int w, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x7379746578747572ull));
  Clip clip(ClipShape{t, c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    const Plane frame = synth_textured_frame(h, w, rng);
    for (int ti = 0; ti < t; ++ti) clip.set_plane(ti, ch, frame);
  }
  return clip;
}

// Clip for temporal-energy analysis: sparse patches of broad ripple texture
// on a dark field, under a slow sinusoidal brightness drift, plus small
// per-frame grain. Cubing the smooth patch field keeps the mean level low,
// and the ripple wavelength sits inside the decomposition's pass band, so
// the scenery carries strong low-band gradients without a heavy DC pedestal.
// The drift keeps the low-pass band's temporal spectrum concentrated near
// DC while the grain gives the high-pass band a flat spectrum, so the clean
// low band scores a much higher low-band fraction than the residual.
inline Clip synth_energy_clip(int t, int c, int h, int w, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x73796e656e657267ull));
  Clip clip(ClipShape{t, c, h, w});
  Plane frame(h, w);
  const double k = 2.0 * std::numbers::pi / 13.0;
  for (int ch = 0; ch < c; ++ch) {
    const Plane blobs = synth_smooth_field(h, w, 3.0, rng);
    const double px = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double py = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (int ti = 0; ti < t; ++ti) {
      const double phase =
          2.0 * std::numbers::pi * static_cast<double>(ti) / static_cast<double>(t);
      const float gain = static_cast<float>(1.0 + 0.06 * std::sin(phase));
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const float b = blobs.at(y, x);
          const double ripple =
              0.5 + 0.5 * std::sin(k * x + px) * std::sin(k * y + py);
          const float base =
              0.02f + 0.9f * b * b * b * static_cast<float>(ripple);
          const float grain = static_cast<float>(rng.uniform01() - 0.5) * 0.085f;
          frame.at(y, x) = base * gain + grain;
        }
      }
      clip.set_plane(ti, ch, frame);
    }
  }
  return clip;
}

// Source pair with distinct scenery and monotone per-pixel brightness ramps
// whose rate varies smoothly across the frame; fused is their midpoint
// blend. Monotone trajectories give every pixel the same clean temporal
// rank order, so windowed rank agreement between fused and sources starts
// near perfect and degrades in proportion to how far frame reordering moves
// frames, uniformly across sequences.
inline ClipTriple synth_bench_triple(int t, int h, int w, std::uint64_t seed,
                                     const std::string& name) {
  Rng rng(mix_seed(seed, 0x73796e626e636831ull));
  Plane base_ir = synth_smooth_field(h, w, 2.5, rng, 0.15f, 0.52f);
  Plane base_vi = synth_smooth_field(h, w, 3.5, rng, 0.18f, 0.50f);
  // Static spatial grain gives every pixel a strong local descriptor, so no
  // trajectory is drowned out by the per-frame jitter below.
  for (float& v : base_ir.v) v += static_cast<float>(rng.uniform01()) * 0.22f;
  for (float& v : base_vi.v) v += static_cast<float>(rng.uniform01()) * 0.20f;
  const Plane rate_ir = synth_smooth_field(h, w, 8.0, rng, 0.18f, 0.30f);
  const Plane rate_vi = synth_smooth_field(h, w, 8.0, rng, 0.18f, 0.30f);

  ClipTriple triple;
  triple.name = name;
  const ClipShape shape{t, 1, h, w};
  triple.ir = Clip(shape);
  triple.vi = Clip(shape);
  triple.fused = Clip(shape);
  Plane ir(h, w), vi(h, w), fu(h, w);
  for (int ti = 0; ti < t; ++ti) {
    const double ramp = t > 1 ? 2.0 * ti / (t - 1.0) - 1.0 : 0.0;
    for (std::size_t i = 0; i < ir.v.size(); ++i) {
      const double a = 1.0 + static_cast<double>(rate_ir.v[i]) * ramp;
      const double b = 1.0 + static_cast<double>(rate_vi.v[i]) * ramp;
      const float jitter_ir = static_cast<float>(rng.uniform01() - 0.5) * 0.0005f;
      const float jitter_vi = static_cast<float>(rng.uniform01() - 0.5) * 0.0005f;
      ir.v[i] = base_ir.v[i] * static_cast<float>(a) + jitter_ir;
      vi.v[i] = base_vi.v[i] * static_cast<float>(b) + jitter_vi;
      fu.v[i] = 0.5f * (ir.v[i] + vi.v[i]);
    }
    triple.ir.set_plane(ti, 0, ir);
    triple.vi.set_plane(ti, 0, vi);
    triple.fused.set_plane(ti, 0, fu);
  }
  return triple;
}

inline std::vector<ClipTriple> synth_bench_corpus(int count, int t, int h, int w,
                                                  std::uint64_t seed) {
  std::vector<ClipTriple> corpus;
  corpus.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    corpus.push_back(synth_bench_triple(t, h, w,
                                        mix_seed(seed, static_cast<std::uint64_t>(i) + 1),
                                        "seq" + std::to_string(i)));
  }
  return corpus;
}

}  // namespace ivf
