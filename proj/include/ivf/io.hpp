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

// Clip I/O.
//
// Two interchange formats:
//   - PNG frame directories: 8-bit gray or RGB frames, frame order taken
//     from the lexicographic order of the file names, values scaled to
//     [0,1] by 1/255.
//   - raw-f32: little-endian IEEE-754 floats in row-major T,C,H,W order,
//     with a JSON sidecar (same stem, ".json") declaring {t,c,h,w}.
//
// Failure taxonomy: unreadable paths raise IoError, malformed content
// (bad sidecar, byte-count mismatch, undecodable PNG) raises FormatError,
// and inconsistent frame dimensions raise DimensionError.

#pragma once

#include <png.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include "ivf/clip.hpp"
#include "ivf/error.hpp"
#include "json.hpp"

namespace ivf {

// ---------------------------------------------------------------------------
// Numeric formatting: every numeric dump uses 9 significant digits.
// ---------------------------------------------------------------------------

inline std::string fmt_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Rounds through the 9-significant-digit decimal representation, so values
// stored into JSON documents serialize exactly like fmt_g9 prints them.
inline double round_sig9(double v) {
  return std::strtod(fmt_g9(v).c_str(), nullptr);
}

// ---------------------------------------------------------------------------
// Little-endian float payloads
// ---------------------------------------------------------------------------

inline void store_f32_le(float f, unsigned char* p) {
  const std::uint32_t u = std::bit_cast<std::uint32_t>(f);
  p[0] = static_cast<unsigned char>(u & 0xff);
  p[1] = static_cast<unsigned char>((u >> 8) & 0xff);
  p[2] = static_cast<unsigned char>((u >> 16) & 0xff);
  p[3] = static_cast<unsigned char>((u >> 24) & 0xff);
}

inline float load_f32_le(const unsigned char* p) {
  const std::uint32_t u = static_cast<std::uint32_t>(p[0]) |
                          (static_cast<std::uint32_t>(p[1]) << 8) |
                          (static_cast<std::uint32_t>(p[2]) << 16) |
                          (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(u);
}

// ---------------------------------------------------------------------------
// Text files
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string s((std::istreambuf_iterator<char>(in)),
                std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + path);
  return s;
}

inline void write_text_file(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw IoError("write failed on " + path);
}

// ---------------------------------------------------------------------------
// raw-f32 + JSON sidecar
// ---------------------------------------------------------------------------

inline std::string sidecar_path_for(const std::string& raw_path) {
  std::filesystem::path p(raw_path);
  p.replace_extension(".json");
  return p.string();
}

inline Clip load_clip_raw(const std::string& raw_path) {
  const std::string side = sidecar_path_for(raw_path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(side));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("sidecar " + side + " is not valid JSON: " + e.what());
  }
  for (const char* key : {"t", "c", "h", "w"}) {
    if (!meta.contains(key) || !meta[key].is_number_integer()) {
      throw FormatError("sidecar " + side + " missing integer key '" + key + "'");
    }
  }
  const int t = meta["t"].get<int>();
  const int c = meta["c"].get<int>();
  const int h = meta["h"].get<int>();
  const int w = meta["w"].get<int>();
  if (t < 1 || c < 1 || h < 1 || w < 1) {
    throw FormatError("sidecar " + side + " declares non-positive dimensions");
  }

  std::ifstream in(raw_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + raw_path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed on " + raw_path);

  Clip clip(t, c, h, w);
  const std::size_t want = clip.shape().elements() * 4u;
  if (bytes.size() != want) {
    throw FormatError(raw_path + ": payload holds " + std::to_string(bytes.size()) +
                      " bytes but sidecar shape " + clip.shape().str() +
                      " requires " + std::to_string(want));
  }
  float* dst = clip.raw().data();
  for (std::size_t i = 0; i < clip.shape().elements(); ++i) {
    dst[i] = load_f32_le(&bytes[i * 4]);
  }
  return clip;
}

// Writes "<stem>.raw" plus "<stem>.json". If `path` names a directory (or has
// no .raw extension), the pair is written as clip.raw/clip.json inside it.
inline void save_clip_raw(const std::string& path, const Clip& clip) {
  std::filesystem::path p(path);
  if (p.extension() != ".raw") {
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    p /= "clip.raw";
  } else if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::vector<unsigned char> bytes(clip.shape().elements() * 4u);
  const float* src = clip.raw().data();
  for (std::size_t i = 0; i < clip.shape().elements(); ++i) {
    store_f32_le(src[i], &bytes[i * 4]);
  }
  {
    std::ofstream out(p.string(), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + p.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed on " + p.string());
  }
  nlohmann::json meta;
  meta["t"] = clip.t();
  meta["c"] = clip.c();
  meta["h"] = clip.h();
  meta["w"] = clip.w();
  write_text_file(sidecar_path_for(p.string()), meta.dump() + "\n");
}

// ---------------------------------------------------------------------------
// PNG frames
// ---------------------------------------------------------------------------

struct PngImage {
  int h = 0;
  int w = 0;
  int c = 0;                   // 1 or 3 after decode transforms
  std::vector<float> planes;   // C,H,W planar, values in [0,1]
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace detail

inline PngImage read_png(const std::string& path) {
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);

  unsigned char sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw FormatError(path + " is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng allocation failure");
  }

  std::vector<unsigned char> inter;
  std::vector<png_bytep> rows;
  int width = 0, height = 0, channels = 0;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("failed to decode PNG " + path);
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color_type = png_get_color_type(png, info);
  const png_byte bit_depth = png_get_bit_depth(png, info);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (bit_depth == 16) png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  channels = static_cast<int>(png_get_channels(png, info));
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError(path + ": unsupported channel count after decode: " +
                      std::to_string(channels));
  }

  const std::size_t rowbytes = png_get_rowbytes(png, info);
  inter.resize(rowbytes * static_cast<std::size_t>(height));
  rows.resize(static_cast<std::size_t>(height));
  for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = &inter[rowbytes * y];
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  PngImage img;
  img.h = height;
  img.w = width;
  img.c = channels;
  img.planes.resize(static_cast<std::size_t>(channels) * height * width);
  for (int y = 0; y < height; ++y) {
    const unsigned char* row = &inter[rowbytes * y];
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        img.planes[(static_cast<std::size_t>(c) * height + y) * width + x] =
            static_cast<float>(row[x * channels + c]) / 255.0f;
      }
    }
  }
  return img;
}

// Writes an 8-bit gray (C=1) or RGB (C=3) PNG; values are clamped to [0,1]
// and rounded to the nearest of the 256 levels.
inline void write_png(const std::string& path, int h, int w, int c,
                      const float* const* planes) {
  if (c != 1 && c != 3) {
    throw DimensionError("PNG output supports C in {1,3}, got C=" + std::to_string(c));
  }
  std::unique_ptr<std::FILE, detail::FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open " + path + " for writing");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("libpng allocation failure");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng allocation failure");
  }

  std::vector<unsigned char> inter(static_cast<std::size_t>(h) * w * c);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ch = 0; ch < c; ++ch) {
        float v = planes[ch][static_cast<std::size_t>(y) * w + x];
        if (v < 0.f) v = 0.f;
        if (v > 1.f) v = 1.f;
        inter[(static_cast<std::size_t>(y) * w + x) * c + ch] =
            static_cast<unsigned char>(v * 255.0f + 0.5f);
      }
    }
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(h));
  for (int y = 0; y < h; ++y) rows[static_cast<std::size_t>(y)] = &inter[static_cast<std::size_t>(y) * w * c];

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed to write PNG " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8,
               c == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Clip load_clip_png_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError(dir + " is not a readable directory");
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".png") {
      names.push_back(entry.path().filename().string());
    }
  }
  if (ec) throw IoError("cannot list " + dir);
  if (names.empty()) throw FormatError("no PNG frames found in " + dir);
  std::sort(names.begin(), names.end());

  Clip clip;
  for (std::size_t t = 0; t < names.size(); ++t) {
    const PngImage img = read_png((fs::path(dir) / names[t]).string());
    if (t == 0) {
      clip = Clip(static_cast<int>(names.size()), img.c, img.h, img.w);
    } else if (img.c != clip.c() || img.h != clip.h() || img.w != clip.w()) {
      throw DimensionError(names[t] + " has mismatched frame dimensions (" +
                           std::to_string(img.h) + "x" + std::to_string(img.w) +
                           "x" + std::to_string(img.c) + " vs first frame)");
    }
    std::memcpy(clip.plane_data(static_cast<int>(t), 0), img.planes.data(),
                img.planes.size() * sizeof(float));
  }
  return clip;
}

inline void save_clip_png_dir(const std::string& dir, const Clip& clip) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  for (int t = 0; t < clip.t(); ++t) {
    std::vector<const float*> planes(static_cast<std::size_t>(clip.c()));
    for (int c = 0; c < clip.c(); ++c) planes[static_cast<std::size_t>(c)] = clip.plane_data(t, c);
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%05d.png", t);
    write_png((fs::path(dir) / name).string(), clip.h(), clip.w(), clip.c(), planes.data());
  }
}

// ---------------------------------------------------------------------------
// Auto-detecting load/save
// ---------------------------------------------------------------------------

enum class ClipFormat { kAuto, kPngSequence, kRawF32 };

inline Clip load_clip(const std::string& path, ClipFormat format = ClipFormat::kAuto) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (format == ClipFormat::kPngSequence) return load_clip_png_dir(path);
  if (format == ClipFormat::kRawF32) {
    if (fs::is_directory(path, ec)) return load_clip_raw((fs::path(path) / "clip.raw").string());
    return load_clip_raw(path);
  }
  if (fs::is_directory(path, ec)) {
    bool has_png = false, has_raw = false;
    std::string raw_name;
    for (const auto& entry : fs::directory_iterator(path, ec)) {
      if (!entry.is_regular_file()) continue;
      const auto ext = entry.path().extension();
      if (ext == ".png") has_png = true;
      if (ext == ".raw") {
        has_raw = true;
        raw_name = entry.path().string();
      }
    }
    if (ec) throw IoError("cannot list " + path);
    if (has_png) return load_clip_png_dir(path);
    if (has_raw) return load_clip_raw(raw_name);
    throw FormatError(path + " contains neither PNG frames nor a raw-f32 payload");
  }
  if (!fs::exists(path, ec)) throw IoError("no such path: " + path);
  const auto ext = fs::path(path).extension();
  if (ext == ".raw") return load_clip_raw(path);
  if (ext == ".json") {
    std::filesystem::path p(path);
    p.replace_extension(".raw");
    return load_clip_raw(p.string());
  }
  throw FormatError(path + ": unrecognized clip format");
}

inline void save_clip(const std::string& path, const Clip& clip,
                      ClipFormat format = ClipFormat::kRawF32) {
  if (format == ClipFormat::kPngSequence) {
    save_clip_png_dir(path, clip);
  } else {
    save_clip_raw(path, clip);
  }
}

}  // namespace ivf
