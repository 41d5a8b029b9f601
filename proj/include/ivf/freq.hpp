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

// Low/high frequency decomposition and temporal-energy analysis.
//
// The decomposition averages three stride-1 box filters (3x3, 5x5, 7x7 over
// reflection padding) with softmax-normalized scale weights; the high band
// is the residual, so low + high reconstructs the input exactly up to float
// rounding.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/error.hpp"
#include "ivf/perturb.hpp"
#include "ivf/video_core.hpp"

namespace ivf {

inline constexpr std::array<int, 3> kDecompKernels = {3, 5, 7};

struct DecompWeights {
  std::array<double, 3> logits = {0.0, 0.0, 0.0};

  // Softmax with max subtraction; stable for logits out to +-50 and beyond.
  std::array<double, 3> weights() const {
    double m = logits[0];
    for (double v : logits) m = std::max(m, v);
    std::array<double, 3> e{};
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
      e[i] = std::exp(logits[i] - m);
      total += e[i];
    }
    for (double& v : e) v /= total;
    return e;
  }
};

struct FreqPair {
  Clip low;
  Clip high;
};

inline FreqPair decompose(const Clip& input, const DecompWeights& weights = {}) {
  if (input.h() < 7 || input.w() < 7) {
    throw DimensionError("decompose needs H,W >= 7, got " + input.shape().str());
  }
  const std::array<double, 3> alpha = weights.weights();
  FreqPair out{Clip(input.shape()), Clip(input.shape())};
  const std::size_t n = static_cast<std::size_t>(input.h()) * input.w();
  std::vector<double> acc(n);
  for (int t = 0; t < input.t(); ++t) {
    for (int c = 0; c < input.c(); ++c) {
      const PlaneRef src = input.plane(t, c);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t ki = 0; ki < kDecompKernels.size(); ++ki) {
        const Plane pooled = avg_pool_reflect(src, kDecompKernels[ki]);
        for (std::size_t i = 0; i < n; ++i) {
          acc[i] += alpha[ki] * pooled.v[i];
        }
      }
      float* lo = out.low.plane_data(t, c);
      float* hi = out.high.plane_data(t, c);
      for (std::size_t i = 0; i < n; ++i) {
        lo[i] = static_cast<float>(acc[i]);
        hi[i] = src.data[i] - lo[i];
      }
    }
  }
  return out;
}

struct EnergyReport {
  double e_low = 0.0;
  double e_high = 0.0;
  double r_low = 0.0;
  double eta_low = 0.0;
  double eta_high = 0.0;
  int cutoff_bins = 1;
};

namespace detail {

// Mean over elements of the squared inter-frame difference, averaged over
// the T-1 frame pairs.
inline double temporal_variation_energy(const Clip& clip) {
  const std::size_t n = static_cast<std::size_t>(clip.c()) * clip.h() * clip.w();
  double total = 0.0;
  for (int t = 1; t < clip.t(); ++t) {
    const float* cur = clip.plane_data(t, 0);
    const float* prev = clip.plane_data(t - 1, 0);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = static_cast<double>(cur[i]) - prev[i];
      acc += d * d;
    }
    total += acc / static_cast<double>(n);
  }
  return total / static_cast<double>(clip.t() - 1);
}

// Fraction of per-pixel temporal-DFT energy in the DC bin plus the
// cutoff_bins lowest non-DC frequencies, averaged over pixels/channels.
// Pixels with zero total energy count as fully low-band.
inline double low_band_ratio(const Clip& clip, int cutoff_bins) {
  const int t_n = clip.t();
  std::vector<double> signal(static_cast<std::size_t>(t_n));
  double ratio_sum = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < clip.c(); ++c) {
    for (int y = 0; y < clip.h(); ++y) {
      for (int x = 0; x < clip.w(); ++x) {
        for (int t = 0; t < t_n; ++t) {
          signal[static_cast<std::size_t>(t)] = clip.at(t, c, y, x);
        }
        double low = 0.0, total = 0.0;
        for (int j = 0; j < t_n; ++j) {
          double re = 0.0, im = 0.0;
          for (int t = 0; t < t_n; ++t) {
            const double ang = -2.0 * std::numbers::pi * j * t / t_n;
            re += signal[static_cast<std::size_t>(t)] * std::cos(ang);
            im += signal[static_cast<std::size_t>(t)] * std::sin(ang);
          }
          const double e = re * re + im * im;
          total += e;
          const int freq = std::min(j, t_n - j);  // bins j and T-j alias
          if (j == 0 || freq <= cutoff_bins) low += e;
        }
        ratio_sum += total > 0.0 ? low / total : 1.0;
        ++count;
      }
    }
  }
  return ratio_sum / static_cast<double>(count);
}

}  // namespace detail

inline EnergyReport temporal_energy(const FreqPair& pair, int cutoff_bins = 1) {
  require_same_shape(pair.low, pair.high, "temporal_energy low vs high");
  const int t_n = pair.low.t();
  if (t_n < 2) {
    throw InsufficientFramesError("temporal_energy needs T >= 2, got T=" +
                                  std::to_string(t_n));
  }
  const int max_cutoff = (t_n + 1) / 2;
  if (cutoff_bins < 1 || cutoff_bins > max_cutoff) {
    throw ParameterError("cutoff_bins must lie in [1, " + std::to_string(max_cutoff) +
                         "], got " + std::to_string(cutoff_bins));
  }
  EnergyReport rep;
  rep.cutoff_bins = cutoff_bins;
  rep.e_low = detail::temporal_variation_energy(pair.low);
  rep.e_high = detail::temporal_variation_energy(pair.high);
  const double denom = rep.e_low + rep.e_high;
  rep.r_low = denom > 0.0 ? rep.e_low / denom : 0.0;
  rep.eta_low = detail::low_band_ratio(pair.low, cutoff_bins);
  rep.eta_high = detail::low_band_ratio(pair.high, cutoff_bins);
  return rep;
}

// Perturbs `clip` at each strength (first must be 0: the baseline row),
// decomposes with uniform scale weights, and reports temporal energies.
// `aux` supplies the second source for modality_drift (the clip itself is
// used as the infrared source).
inline std::vector<EnergyReport> energy_sweep(const Clip& clip, const Clip* aux,
                                              PerturbFamily family, std::uint64_t seed,
                                              const std::vector<double>& strengths,
                                              int cutoff_bins = 1) {
  if (strengths.empty() || strengths.front() != 0.0) {
    throw ParameterError("energy_sweep needs a non-empty strength list starting at 0");
  }
  std::vector<EnergyReport> reports;
  reports.reserve(strengths.size());
  for (double s : strengths) {
    const PerturbSpec spec{family, s, seed};
    const Clip perturbed = apply_perturbation(clip, spec, &clip, aux);
    reports.push_back(temporal_energy(decompose(perturbed), cutoff_bins));
  }
  return reports;
}

}  // namespace ivf
