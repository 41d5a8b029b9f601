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

// End-to-end dual-frequency fusion forward: decompose both modalities,
// enhance and fuse the low band, cross-attend and fuse the high band, then
// mix [F_low, lambda_hf * F_high] back to C channels with a pointwise map.

#pragma once

#include <vector>

#include "ivf/clip.hpp"
#include "ivf/conv.hpp"
#include "ivf/error.hpp"
#include "ivf/freq.hpp"
#include "ivf/lowfreq.hpp"
#include "ivf/rng.hpp"
#include "ivf/scam.hpp"

namespace ivf {

struct DfamParams {
  int c = 0;
  DecompWeights decomp;
  LfpmParams lfpm_ir;
  LfpmParams lfpm_vi;
  LtcmParams ltcm;
  ScamConfig scam_cfg;
  ScamParams scam;
  ScamLocalParams scam_local;
  PointwiseMap mix;  // 2C -> C output mapping
  float lambda_hf = 1.0f;

  static DfamParams zeros(int channels, const ScamConfig& cfg = {}) {
    DfamParams p;
    p.c = channels;
    p.scam_cfg = cfg;
    p.lfpm_ir = LfpmParams::zeros(channels);
    p.lfpm_vi = LfpmParams::zeros(channels);
    p.ltcm = LtcmParams::zeros(channels);
    p.scam = ScamParams::zeros(channels, cfg);
    p.scam_local = ScamLocalParams::zeros(channels);
    p.mix = PointwiseMap(2 * channels, channels);
    return p;
  }

  // Sub-module parameter sets draw from independent seed streams derived
  // from `seed`, so adding parameters to one module never shifts another's.
  static DfamParams seeded(int channels, const ScamConfig& cfg, std::uint64_t seed) {
    DfamParams p = zeros(channels, cfg);
    p.lfpm_ir = LfpmParams::seeded(channels, mix_seed(seed, 0x6c66706d2d697231ULL));
    p.lfpm_vi = LfpmParams::seeded(channels, mix_seed(seed, 0x6c66706d2d766931ULL));
    p.ltcm = LtcmParams::seeded(channels, mix_seed(seed, 0x6c74636d31313131ULL));
    p.scam = ScamParams::seeded(channels, cfg, mix_seed(seed, 0x7363616d31313131ULL));
    p.scam_local = ScamLocalParams::seeded(channels, mix_seed(seed, 0x7363616d6c6f6331ULL));
    Rng rng(mix_seed(seed, 0x6d69783263746f63ULL));
    p.mix.init(rng);
    return p;
  }
};

struct DfamTrace {
  FreqPair freq_ir;
  FreqPair freq_vi;
  Clip f_low;
  Clip f_high;
  Clip concat;  // [F_low, lambda_hf * F_high], the mixing map's input
  LfpmTrace lfpm_ir;
  LfpmTrace lfpm_vi;
  LtcmTrace ltcm;
  ScamTrace scam;
};

inline Clip dfam_forward(const Clip& f_ir, const Clip& f_vi, const DfamParams& params,
                         std::uint64_t seed, DfamTrace* trace = nullptr) {
  require_same_shape(f_ir, f_vi, "dfam_forward ir vs vi");
  FreqPair d_ir = decompose(f_ir, params.decomp);
  FreqPair d_vi = decompose(f_vi, params.decomp);

  const Clip lf_ir = lfpm_forward(d_ir.low, params.lfpm_ir,
                                  mix_seed(seed, 0x7365712d69722d31ULL),
                                  trace ? &trace->lfpm_ir : nullptr);
  const Clip lf_vi = lfpm_forward(d_vi.low, params.lfpm_vi,
                                  mix_seed(seed, 0x7365712d76692d31ULL),
                                  trace ? &trace->lfpm_vi : nullptr);
  Clip f_low = ltcm_fuse(lf_ir, lf_vi, params.ltcm, trace ? &trace->ltcm : nullptr);

  Clip f_high = scam_forward(d_ir.high, d_vi.high, params.scam_cfg, params.scam,
                             params.scam_local, trace ? &trace->scam : nullptr);

  Clip cat(f_ir.t(), 2 * f_ir.c(), f_ir.h(), f_ir.w());
  const std::size_t n = static_cast<std::size_t>(f_ir.h()) * f_ir.w();
  for (int t = 0; t < f_ir.t(); ++t) {
    for (int c = 0; c < f_ir.c(); ++c) {
      cat.copy_plane(t, c, f_low, t, c);
      const float* src = f_high.plane_data(t, c);
      float* dst = cat.plane_data(t, f_ir.c() + c);
      for (std::size_t i = 0; i < n; ++i) dst[i] = params.lambda_hf * src[i];
    }
  }
  Clip out = params.mix.apply(cat);

  if (trace) {
    trace->freq_ir = std::move(d_ir);
    trace->freq_vi = std::move(d_vi);
    trace->f_low = std::move(f_low);
    trace->f_high = std::move(f_high);
    trace->concat = cat;
  }
  return out;
}

}  // namespace ivf
