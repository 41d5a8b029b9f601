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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "ivf/error.hpp"

namespace ivf {

struct ClipShape {
  int t = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  bool operator==(const ClipShape&) const = default;

  std::size_t elements() const {
    return static_cast<std::size_t>(t) * c * h * w;
  }

  std::string str() const {
    return "(" + std::to_string(t) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// Single-channel H×W image, row-major.
struct Plane {
  int h = 0;
  int w = 0;
  std::vector<float> v;

  Plane() = default;
  Plane(int h_, int w_, float fill = 0.f)
      : h(h_), w(w_), v(static_cast<std::size_t>(h_) * w_, fill) {}

  float& at(int y, int x) { return v[static_cast<std::size_t>(y) * w + x]; }
  float at(int y, int x) const { return v[static_cast<std::size_t>(y) * w + x]; }
};

// Non-owning read view of one frame/channel slice.
struct PlaneRef {
  const float* data = nullptr;
  int h = 0;
  int w = 0;

  PlaneRef() = default;
  PlaneRef(const float* d, int h_, int w_) : data(d), h(h_), w(w_) {}
  PlaneRef(const Plane& p) : data(p.v.data()), h(p.h), w(p.w) {}  // NOLINT

  float at(int y, int x) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

// Dense T×C×H×W sequence of 32-bit reals, row-major in (t, c, y, x).
//
// The same container carries both image clips (C in {1,3}, values nominally
// in [0,1]) and intermediate feature tensors (any C >= 1); the {1,3} channel
// restriction is enforced at the image I/O and color boundaries, not here.
class Clip {
 public:
  Clip() = default;

  Clip(int t, int c, int h, int w, float fill = 0.f) : shape_{t, c, h, w} {
    if (t < 1 || c < 1 || h < 1 || w < 1) {
      throw DimensionError("clip dimensions must be strictly positive, got " +
                           shape_.str());
    }
    data_.assign(shape_.elements(), fill);
  }

  explicit Clip(ClipShape s, float fill = 0.f) : Clip(s.t, s.c, s.h, s.w, fill) {}

  const ClipShape& shape() const { return shape_; }
  int t() const { return shape_.t; }
  int c() const { return shape_.c; }
  int h() const { return shape_.h; }
  int w() const { return shape_.w; }

  float& at(int t, int c, int y, int x) { return data_[index(t, c, y, x)]; }
  float at(int t, int c, int y, int x) const { return data_[index(t, c, y, x)]; }

  float* plane_data(int t, int c) { return data_.data() + index(t, c, 0, 0); }
  const float* plane_data(int t, int c) const {
    return data_.data() + index(t, c, 0, 0);
  }

  PlaneRef plane(int t, int c) const {
    return PlaneRef(plane_data(t, c), shape_.h, shape_.w);
  }

  void set_plane(int t, int c, const Plane& p) {
    if (p.h != shape_.h || p.w != shape_.w) {
      throw DimensionError("plane size (" + std::to_string(p.h) + "," +
                           std::to_string(p.w) + ") does not match clip " +
                           shape_.str());
    }
    std::copy(p.v.begin(), p.v.end(), plane_data(t, c));
  }

  Plane copy_plane(int t, int c) const {
    Plane p(shape_.h, shape_.w);
    const float* src = plane_data(t, c);
    std::copy(src, src + p.v.size(), p.v.begin());
    return p;
  }

  // Copies one H×W slice from another clip of the same spatial size.
  void copy_plane(int t, int c, const Clip& src, int src_t, int src_c) {
    if (src.h() != shape_.h || src.w() != shape_.w) {
      throw DimensionError("plane copy between mismatched spatial sizes, " +
                           src.shape().str() + " vs " + shape_.str());
    }
    const float* s = src.plane_data(src_t, src_c);
    std::copy(s, s + static_cast<std::size_t>(shape_.h) * shape_.w,
              plane_data(t, c));
  }

  std::vector<float>& raw() { return data_; }
  const std::vector<float>& raw() const { return data_; }

  bool all_finite() const {
    for (float x : data_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  bool operator==(const Clip& o) const {
    return shape_ == o.shape_ && data_ == o.data_;
  }

 private:
  std::size_t index(int t, int c, int y, int x) const {
    return ((static_cast<std::size_t>(t) * shape_.c + c) * shape_.h + y) *
               shape_.w +
           x;
  }

  ClipShape shape_;
  std::vector<float> data_;
};

inline void require_same_shape(const Clip& a, const Clip& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError(std::string(what) + ": clip shapes differ, " +
                         a.shape().str() + " vs " + b.shape().str());
  }
}

}  // namespace ivf
