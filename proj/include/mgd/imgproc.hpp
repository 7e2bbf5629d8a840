// Copyright 2026 The MGD Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Pixel-level primitives over single-channel 8-bit images: differencing,
// binarization, 3x3 morphology, connected components, cropping, resizing.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mgd/error.hpp"

namespace mgd {

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Axis-aligned box in image coordinates. (x, y) is the top-left corner.
/// Pixel boxes produced by the pipeline hold integral values; boxes that went
/// through a homography may be fractional.
struct BoundingBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  Point2 center() const { return {x + 0.5 * w, y + 0.5 * h}; }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Single-channel intensity image with its position in the stream.
class Frame {
 public:
  Frame() = default;

  Frame(int width, int height, std::int64_t index = 0, std::uint8_t fill = 0)
      : width_(width), height_(height), index_(index) {
    if (width <= 0 || height <= 0) {
      throw InvalidInput("Frame: dimensions must be positive");
    }
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  Frame(int width, int height, std::int64_t index, std::vector<std::uint8_t> pixels)
      : width_(width), height_(height), index_(index), pixels_(std::move(pixels)) {
    if (width <= 0 || height <= 0) {
      throw InvalidInput("Frame: dimensions must be positive");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * height) {
      throw InvalidInput("Frame: pixel count does not match width * height");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::int64_t index() const { return index_; }
  void set_index(std::int64_t index) { index_ = index; }
  bool empty() const { return pixels_.empty(); }

  std::uint8_t at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const std::uint8_t> row(int y) const {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }
  std::span<std::uint8_t> row(int y) {
    return {pixels_.data() + static_cast<std::size_t>(y) * width_, static_cast<std::size_t>(width_)};
  }

  const std::vector<std::uint8_t>& pixels() const { return pixels_; }
  std::vector<std::uint8_t>& pixels() { return pixels_; }

  bool same_size(const Frame& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::int64_t index_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// Row-major foreground flags, one byte per pixel holding 0 or 1.
class BinaryMask {
 public:
  BinaryMask() = default;
  BinaryMask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill ? 1 : 0) {
    if (width <= 0 || height <= 0) {
      throw InvalidInput("BinaryMask: dimensions must be positive");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v = true) {
    bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0;
  }

  const std::vector<std::uint8_t>& bits() const { return bits_; }
  std::vector<std::uint8_t>& bits() { return bits_; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }

  bool same_size(const BinaryMask& o) const { return width_ == o.width_ && height_ == o.height_; }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Rec.601 luma, rounded to nearest.
inline std::uint8_t luma601(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

inline Frame abs_diff(const Frame& a, const Frame& b) {
  if (!a.same_size(b)) {
    throw InvalidInput("abs_diff: frame dimensions differ");
  }
  Frame out(a.width(), a.height(), a.index());
  const auto& pa = a.pixels();
  const auto& pb = b.pixels();
  auto& po = out.pixels();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const int d = static_cast<int>(pa[i]) - static_cast<int>(pb[i]);
    po[i] = static_cast<std::uint8_t>(d < 0 ? -d : d);
  }
  return out;
}

/// Foreground where pixel >= threshold.
inline BinaryMask binarize(const Frame& d, int threshold) {
  if (threshold < 0 || threshold > 255) {
    throw InvalidInput("binarize: threshold outside [0,255]");
  }
  BinaryMask m(d.width(), d.height());
  const auto& src = d.pixels();
  auto& dst = m.bits();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = src[i] >= threshold ? 1 : 0;
  }
  return m;
}

inline BinaryMask mask_or(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_size(b)) {
    throw InvalidInput("mask_or: mask dimensions differ");
  }
  BinaryMask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.bits().size(); ++i) {
    out.bits()[i] = a.bits()[i] | b.bits()[i];
  }
  return out;
}

inline BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_size(b)) {
    throw InvalidInput("mask_and: mask dimensions differ");
  }
  BinaryMask out(a.width(), a.height());
  for (std::size_t i = 0; i < a.bits().size(); ++i) {
    out.bits()[i] = a.bits()[i] & b.bits()[i];
  }
  return out;
}

namespace detail {

// 3x3 rectangular min (erode) or max (dilate), separable. Pixels outside the
// image count as background for both operations.
template <bool kErode>
BinaryMask morph3x3(const BinaryMask& m) {
  const int w = m.width();
  const int h = m.height();
  const auto& src = m.bits();
  std::vector<std::uint8_t> tmp(src.size());
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* s = src.data() + static_cast<std::size_t>(y) * w;
    std::uint8_t* t = tmp.data() + static_cast<std::size_t>(y) * w;
    if (w == 1) {
      t[0] = kErode ? 0 : s[0];
      continue;
    }
    t[0] = kErode ? 0 : (s[0] | s[1]);
    t[w - 1] = kErode ? 0 : (s[w - 2] | s[w - 1]);
    for (int x = 1; x + 1 < w; ++x) {
      t[x] = kErode ? (s[x - 1] & s[x] & s[x + 1]) : (s[x - 1] | s[x] | s[x + 1]);
    }
  }
  BinaryMask out(w, h);
  auto& dst = out.bits();
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* up = y > 0 ? tmp.data() + static_cast<std::size_t>(y - 1) * w : nullptr;
    const std::uint8_t* mid = tmp.data() + static_cast<std::size_t>(y) * w;
    const std::uint8_t* dn = y + 1 < h ? tmp.data() + static_cast<std::size_t>(y + 1) * w : nullptr;
    std::uint8_t* d = dst.data() + static_cast<std::size_t>(y) * w;
    if (kErode) {
      if (!up || !dn) {
        std::fill(d, d + w, std::uint8_t{0});
        continue;
      }
      for (int x = 0; x < w; ++x) d[x] = up[x] & mid[x] & dn[x];
    } else {
      std::copy(mid, mid + w, d);
      if (up) for (int x = 0; x < w; ++x) d[x] |= up[x];
      if (dn) for (int x = 0; x < w; ++x) d[x] |= dn[x];
    }
  }
  return out;
}

}  // namespace detail

inline BinaryMask erode3x3(const BinaryMask& m) { return detail::morph3x3<true>(m); }
inline BinaryMask dilate3x3(const BinaryMask& m) { return detail::morph3x3<false>(m); }

/// Erode `iterations` times, then dilate `iterations` times.
inline BinaryMask morph_open(const BinaryMask& m, int iterations = 1) {
  if (iterations < 1) {
    throw InvalidInput("morph_open: iterations must be >= 1");
  }
  BinaryMask r = m;
  for (int i = 0; i < iterations; ++i) r = erode3x3(r);
  for (int i = 0; i < iterations; ++i) r = dilate3x3(r);
  return r;
}

/// Dilate `iterations` times, then erode `iterations` times.
inline BinaryMask morph_close(const BinaryMask& m, int iterations = 1) {
  if (iterations < 1) {
    throw InvalidInput("morph_close: iterations must be >= 1");
  }
  BinaryMask r = m;
  for (int i = 0; i < iterations; ++i) r = dilate3x3(r);
  for (int i = 0; i < iterations; ++i) r = erode3x3(r);
  return r;
}

struct Component {
  int label = 0;
  std::int64_t area = 0;
  BoundingBox box;
};

/// 8-connected components. Labels are 1..n in output order, which is by
/// (box.y, box.x) of each component's top-left corner.
inline std::vector<Component> connected_components(const BinaryMask& m) {
  const int w = m.width();
  const int h = m.height();
  const std::uint8_t* bits = m.bits().data();

  // Horizontal runs of foreground, linked by union-find. Roots are the
  // earliest run in raster order.
  struct Run {
    int y, x0, x1;  // inclusive
  };
  std::vector<Run> runs;
  std::vector<std::int32_t> parent;
  auto find = [&parent](std::int32_t a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  };

  std::size_t prev_begin = 0;
  std::size_t prev_end = 0;
  for (int y = 0; y < h; ++y) {
    const std::uint8_t* row = bits + static_cast<std::size_t>(y) * w;
    const std::size_t row_begin = runs.size();
    std::size_t p = prev_begin;
    int x = 0;
    while (x < w) {
      // Skip background eight bytes at a time.
      while (x + 8 <= w) {
        std::uint64_t chunk;
        std::memcpy(&chunk, row + x, sizeof(chunk));
        if (chunk != 0) break;
        x += 8;
      }
      while (x < w && !row[x]) ++x;
      if (x >= w) break;
      const int x0 = x;
      while (x < w && row[x]) ++x;
      const int x1 = x - 1;
      const auto id = static_cast<std::int32_t>(runs.size());
      runs.push_back({y, x0, x1});
      parent.push_back(id);
      // 8-connected to any run above spanning [x0 - 1, x1 + 1].
      while (p < prev_end && runs[p].x1 < x0 - 1) ++p;
      for (std::size_t q = p; q < prev_end && runs[q].x0 <= x1 + 1; ++q) {
        const std::int32_t ra = find(static_cast<std::int32_t>(q));
        const std::int32_t rb = find(id);
        if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
      }
    }
    prev_begin = row_begin;
    prev_end = runs.size();
  }

  std::vector<std::int32_t> slot(runs.size(), -1);
  std::vector<Component> out;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Run& r = runs[i];
    const std::int32_t root = find(static_cast<std::int32_t>(i));
    if (slot[root] < 0) {
      slot[root] = static_cast<std::int32_t>(out.size());
      out.push_back({0, 0, BoundingBox{static_cast<double>(r.x0), static_cast<double>(r.y), 0.0, 0.0}});
      out.back().box.w = r.x1 + 1;  // right edge until finalised
      out.back().box.h = r.y + 1;   // bottom edge until finalised
    }
    Component& c = out[static_cast<std::size_t>(slot[root])];
    c.area += r.x1 - r.x0 + 1;
    c.box.x = std::min(c.box.x, static_cast<double>(r.x0));
    c.box.w = std::max(c.box.w, static_cast<double>(r.x1 + 1));
    c.box.h = std::max(c.box.h, static_cast<double>(r.y + 1));
  }
  for (Component& c : out) {
    c.box.w -= c.box.x;
    c.box.h -= c.box.y;
  }
  std::stable_sort(out.begin(), out.end(), [](const Component& p, const Component& q) {
    if (p.box.y != q.box.y) return p.box.y < q.box.y;
    return p.box.x < q.box.x;
  });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].label = static_cast<int>(i) + 1;
  return out;
}

/// Crop an integral box that lies within the image.
inline Frame crop(const Frame& f, const BoundingBox& box) {
  const long x = std::lround(box.x);
  const long y = std::lround(box.y);
  const long w = std::lround(box.w);
  const long h = std::lround(box.h);
  if (w < 1 || h < 1 || x < 0 || y < 0 || x + w > f.width() || y + h > f.height()) {
    throw InvalidInput("crop: box outside image bounds");
  }
  Frame out(static_cast<int>(w), static_cast<int>(h), f.index());
  for (long r = 0; r < h; ++r) {
    auto src = f.row(static_cast<int>(y + r)).subspan(static_cast<std::size_t>(x), static_cast<std::size_t>(w));
    std::copy(src.begin(), src.end(), out.row(static_cast<int>(r)).begin());
  }
  return out;
}

struct ClampedCrop {
  Frame crop;
  Point2 offset;  // top-left of the window in source-image pixels
};

/// Square window of side `size` centred on `center`, shifted to stay inside
/// the image. Images smaller than `size` along an axis yield the full extent.
inline ClampedCrop crop_clamped(const Frame& f, Point2 center, int size) {
  if (size < 1) {
    throw InvalidInput("crop_clamped: size must be >= 1");
  }
  const int w = std::min(size, f.width());
  const int h = std::min(size, f.height());
  auto place = [](double c, int extent, int limit) {
    long start = std::lround(std::floor(c - 0.5 * extent));
    return static_cast<int>(std::clamp<long>(start, 0, limit - extent));
  };
  const int x = place(center.x, w, f.width());
  const int y = place(center.y, h, f.height());
  BoundingBox box{static_cast<double>(x), static_cast<double>(y), static_cast<double>(w),
                  static_cast<double>(h)};
  return {crop(f, box), Point2{static_cast<double>(x), static_cast<double>(y)}};
}

/// Bilinear resize with half-pixel centre alignment and edge clamping.
inline Frame resize_bilinear(const Frame& f, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) {
    throw InvalidInput("resize_bilinear: output size must be >= 1");
  }
  Frame out(out_w, out_h, f.index());
  const double sx = static_cast<double>(f.width()) / out_w;
  const double sy = static_cast<double>(f.height()) / out_h;

  struct Tap {
    int i0, i1;
    double t;
  };
  auto taps = [](int n_out, int n_in, double scale) {
    std::vector<Tap> v(static_cast<std::size_t>(n_out));
    for (int i = 0; i < n_out; ++i) {
      double s = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(n_in - 1));
      const int i0 = static_cast<int>(std::floor(s));
      const int i1 = std::min(i0 + 1, n_in - 1);
      v[static_cast<std::size_t>(i)] = {i0, i1, s - i0};
    }
    return v;
  };
  const auto tx = taps(out_w, f.width(), sx);
  const auto ty = taps(out_h, f.height(), sy);
  for (int y = 0; y < out_h; ++y) {
    const Tap& vy = ty[static_cast<std::size_t>(y)];
    auto r0 = f.row(vy.i0);
    auto r1 = f.row(vy.i1);
    auto dst = out.row(y);
    for (int x = 0; x < out_w; ++x) {
      const Tap& vx = tx[static_cast<std::size_t>(x)];
      const double top = r0[vx.i0] + vx.t * (r0[vx.i1] - r0[vx.i0]);
      const double bot = r1[vx.i0] + vx.t * (r1[vx.i1] - r1[vx.i0]);
      const double v = top + vy.t * (bot - top);
      dst[x] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

}  // namespace mgd
