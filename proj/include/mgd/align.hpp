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

// Frame-to-frame alignment: grid keypoints, pyramidal Lucas-Kanade tracking,
// RANSAC homography estimation, perspective warping and homography algebra.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "mgd/error.hpp"
#include "mgd/imgproc.hpp"

namespace mgd {

/// Determinant magnitude below which a homography is treated as singular.
inline constexpr double kSingularDetFloor = 1e-10;

/// 3x3 projective transform, stored with m(2,2) = 1 whenever that entry is
/// nonzero.
class Homography {
 public:
  Homography() : m_(Eigen::Matrix3d::Identity()) {}

  explicit Homography(const Eigen::Matrix3d& m) : m_(m) {
    if (!m_.allFinite()) {
      throw InvalidInput("Homography: non-finite entries");
    }
    if (std::abs(m_(2, 2)) > 0.0) {
      m_ /= m_(2, 2);
    }
    if (std::abs(m_.determinant()) < kSingularDetFloor) {
      throw InvalidInput("Homography: singular matrix");
    }
  }

  static Homography identity() { return Homography(); }

  static Homography translation(double dx, double dy) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 2) = dx;
    m(1, 2) = dy;
    return Homography(m);
  }

  /// Rotation by `degrees` (counter-clockwise in a y-down image this appears
  /// clockwise) about `pivot`, followed by translation (dx, dy).
  static Homography rigid(double degrees, Point2 pivot, double dx = 0.0, double dy = 0.0) {
    const double a = degrees * std::numbers::pi / 180.0;
    const double c = std::cos(a);
    const double s = std::sin(a);
    Eigen::Matrix3d m;
    m << c, -s, pivot.x - c * pivot.x + s * pivot.y + dx,
         s, c, pivot.y - s * pivot.x - c * pivot.y + dy,
         0, 0, 1;
    return Homography(m);
  }

  const Eigen::Matrix3d& matrix() const { return m_; }
  double operator()(int r, int c) const { return m_(r, c); }

  Point2 apply(Point2 p) const {
    const double w = m_(2, 0) * p.x + m_(2, 1) * p.y + m_(2, 2);
    return {(m_(0, 0) * p.x + m_(0, 1) * p.y + m_(0, 2)) / w,
            (m_(1, 0) * p.x + m_(1, 1) * p.y + m_(1, 2)) / w};
  }

 private:
  Eigen::Matrix3d m_;
};

/// a * b: apply b first, then a.
inline Homography compose(const Homography& a, const Homography& b) {
  return Homography(a.matrix() * b.matrix());
}

inline Homography invert(const Homography& h) {
  if (std::abs(h.matrix().determinant()) < kSingularDetFloor) {
    throw InvalidInput("invert: singular homography");
  }
  return Homography(h.matrix().inverse());
}

/// Maps the four corners and returns their axis-aligned hull.
inline BoundingBox transform_box(const Homography& h, const BoundingBox& b) {
  const std::array<Point2, 4> corners = {Point2{b.x, b.y}, Point2{b.right(), b.y},
                                         Point2{b.x, b.bottom()}, Point2{b.right(), b.bottom()}};
  double x0 = std::numeric_limits<double>::infinity();
  double y0 = x0;
  double x1 = -x0;
  double y1 = -x0;
  for (const Point2& c : corners) {
    const Point2 p = h.apply(c);
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  return {x0, y0, x1 - x0, y1 - y0};
}

// ---------------------------------------------------------------------------
// Keypoints

/// Cell centres of a cols x rows grid, row-major, clamped to the pixel range.
inline std::vector<Point2> sample_grid(int width, int height, int cols = 30, int rows = 20) {
  if (cols < 2 || rows < 2 || width < cols || height < rows) {
    throw InvalidInput("sample_grid: degenerate grid or image smaller than grid");
  }
  const double cw = static_cast<double>(width) / cols;
  const double ch = static_cast<double>(height) / rows;
  std::vector<Point2> pts;
  pts.reserve(static_cast<std::size_t>(cols) * rows);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      pts.push_back({std::min((c + 0.5) * cw, width - 1.0), std::min((r + 0.5) * ch, height - 1.0)});
    }
  }
  return pts;
}

// ---------------------------------------------------------------------------
// Pyramidal Lucas-Kanade

struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  FloatImage() = default;
  FloatImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0f) {}

  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

  /// Bilinear sample with edge clamping.
  float sample(double x, double y) const {
    x = std::clamp(x, 0.0, width - 1.0);
    y = std::clamp(y, 0.0, height - 1.0);
    const int x0 = static_cast<int>(x);
    const int y0 = static_cast<int>(y);
    const int x1 = std::min(x0 + 1, width - 1);
    const int y1 = std::min(y0 + 1, height - 1);
    const float tx = static_cast<float>(x - x0);
    const float ty = static_cast<float>(y - y0);
    const float* r0 = data.data() + static_cast<std::size_t>(y0) * width;
    const float* r1 = data.data() + static_cast<std::size_t>(y1) * width;
    const float top = r0[x0] + tx * (r0[x1] - r0[x0]);
    const float bot = r1[x0] + tx * (r1[x1] - r1[x0]);
    return top + ty * (bot - top);
  }

  /// Samples the (2*half+1)^2 window centred on (cx, cy) into `out`, row by
  /// row. Agrees with sample() up to float rounding; the bilinear weights are
  /// shared across the window when it lies inside the image.
  void sample_window(double cx, double cy, int half, float* out) const {
    const double x0 = cx - half;
    const double y0 = cy - half;
    const int side = 2 * half + 1;
    const double fx0 = std::floor(x0);
    const double fy0 = std::floor(y0);
    const int ix = static_cast<int>(fx0);
    const int iy = static_cast<int>(fy0);
    if (ix < 0 || iy < 0 || ix + side >= width || iy + side >= height) {
      constexpr int kMaxSide = 128;
      if (side > kMaxSide) {
        for (int wy = 0; wy < side; ++wy) {
          for (int wx = 0; wx < side; ++wx) *out++ = sample(x0 + wx, y0 + wy);
        }
        return;
      }
      // Clamped taps per column and per row, as sample() computes them.
      int c0[kMaxSide], c1[kMaxSide];
      float ct[kMaxSide];
      for (int wx = 0; wx < side; ++wx) {
        const double x = std::clamp(x0 + wx, 0.0, width - 1.0);
        c0[wx] = static_cast<int>(x);
        c1[wx] = std::min(c0[wx] + 1, width - 1);
        ct[wx] = static_cast<float>(x - c0[wx]);
      }
      for (int wy = 0; wy < side; ++wy) {
        const double y = std::clamp(y0 + wy, 0.0, height - 1.0);
        const int r0i = static_cast<int>(y);
        const float ty = static_cast<float>(y - r0i);
        const float* r0 = data.data() + static_cast<std::size_t>(r0i) * width;
        const float* r1 = data.data() + static_cast<std::size_t>(std::min(r0i + 1, height - 1)) * width;
        for (int wx = 0; wx < side; ++wx) {
          const float top = r0[c0[wx]] + ct[wx] * (r0[c1[wx]] - r0[c0[wx]]);
          const float bot = r1[c0[wx]] + ct[wx] * (r1[c1[wx]] - r1[c0[wx]]);
          *out++ = top + ty * (bot - top);
        }
      }
      return;
    }
    const float tx = static_cast<float>(x0 - fx0);
    const float ty = static_cast<float>(y0 - fy0);
    for (int wy = 0; wy < side; ++wy) {
      const float* r0 = data.data() + static_cast<std::size_t>(iy + wy) * width + ix;
      const float* r1 = r0 + width;
      for (int wx = 0; wx < side; ++wx) {
        const float top = r0[wx] + tx * (r0[wx + 1] - r0[wx]);
        const float bot = r1[wx] + tx * (r1[wx + 1] - r1[wx]);
        *out++ = top + ty * (bot - top);
      }
    }
  }
};

struct LkParams {
  int levels = 3;        // pyramid levels above the base image
  int window = 21;       // odd window side
  int max_iterations = 30;
  double epsilon = 0.01; // stop when the update is shorter than this (px)
  double min_eigen = 1e-2;  // per-pixel minimum eigenvalue of the gradient matrix
};

/// Gaussian pyramid. Level 0 is the frame itself.
class ImagePyramid {
 public:
  ImagePyramid() = default;

  ImagePyramid(const Frame& f, int levels) {
    FloatImage base(f.width(), f.height());
    std::transform(f.pixels().begin(), f.pixels().end(), base.data.begin(),
                   [](std::uint8_t v) { return static_cast<float>(v); });
    images_.push_back(std::move(base));
    for (int l = 0; l < levels; ++l) {
      const FloatImage& prev = images_.back();
      if (prev.width < 2 || prev.height < 2) break;
      images_.push_back(downsample(prev));
    }
  }

  int levels() const { return static_cast<int>(images_.size()); }
  const FloatImage& image(int l) const { return images_[static_cast<std::size_t>(l)]; }
  int width() const { return images_.empty() ? 0 : images_[0].width; }
  int height() const { return images_.empty() ? 0 : images_[0].height; }

 private:
  // 5-tap binomial blur [1 4 6 4 1]/16 with edge replication, then drop
  // every other sample.
  static FloatImage downsample(const FloatImage& src) {
    const int w = src.width;
    const int h = src.height;
    const int ow = (w + 1) / 2;
    const int oh = (h + 1) / 2;
    auto tap = [](float a, float b, float c, float d, float e) {
      return (a + 4.0f * b + 6.0f * c + 4.0f * d + e) * (1.0f / 16.0f);
    };
    FloatImage horiz(ow, h);
    for (int y = 0; y < h; ++y) {
      const float* s = src.data.data() + static_cast<std::size_t>(y) * w;
      float* d = horiz.data.data() + static_cast<std::size_t>(y) * ow;
      auto at = [s, w](int x) { return s[x < 0 ? 0 : (x >= w ? w - 1 : x)]; };
      int ox = 0;
      for (; ox < ow && 2 * ox < 2; ++ox) {
        const int x = 2 * ox;
        d[ox] = tap(at(x - 2), at(x - 1), s[x], at(x + 1), at(x + 2));
      }
      for (; ox < ow && 2 * ox + 2 < w; ++ox) {
        const float* c = s + 2 * ox;
        d[ox] = tap(c[-2], c[-1], c[0], c[1], c[2]);
      }
      for (; ox < ow; ++ox) {
        const int x = 2 * ox;
        d[ox] = tap(at(x - 2), at(x - 1), s[x], at(x + 1), at(x + 2));
      }
    }
    FloatImage out(ow, oh);
    for (int oy = 0; oy < oh; ++oy) {
      const int y = 2 * oy;
      auto row = [&](int r) {
        return horiz.data.data() + static_cast<std::size_t>(r < 0 ? 0 : (r >= h ? h - 1 : r)) * ow;
      };
      const float* r0 = row(y - 2);
      const float* r1 = row(y - 1);
      const float* r2 = row(y);
      const float* r3 = row(y + 1);
      const float* r4 = row(y + 2);
      float* d = out.data.data() + static_cast<std::size_t>(oy) * ow;
      for (int ox = 0; ox < ow; ++ox) d[ox] = tap(r0[ox], r1[ox], r2[ox], r3[ox], r4[ox]);
    }
    return out;
  }

  std::vector<FloatImage> images_;
};

struct PointMatch {
  Point2 src;
  Point2 dst;
  bool tracked = false;
};

/// Tracks `points` from `prev` into `cur`. Both pyramids must share base size
/// and have at least `params.levels + 1` levels (fewer is tolerated for tiny
/// images).
inline std::vector<PointMatch> lk_track(const ImagePyramid& prev, const ImagePyramid& cur,
                                        std::span<const Point2> points, const LkParams& params = {}) {
  if (prev.width() != cur.width() || prev.height() != cur.height()) {
    throw InvalidInput("lk_track: frame dimensions differ");
  }
  const int top = std::min({params.levels, prev.levels() - 1, cur.levels() - 1});
  const int half = params.window / 2;
  const std::size_t n_win = static_cast<std::size_t>(2 * half + 1) * (2 * half + 1);
  const int side = 2 * half + 1;
  std::vector<float> win_i(n_win), win_gx(n_win), win_gy(n_win), win_j(n_win);
  std::vector<float> padded(static_cast<std::size_t>(side + 2) * (side + 2));

  std::vector<PointMatch> out;
  out.reserve(points.size());
  for (const Point2& pt : points) {
    PointMatch m{pt, pt, true};
    if (!(pt.x >= 0 && pt.y >= 0 && pt.x <= prev.width() - 1 && pt.y <= prev.height() - 1)) {
      m.tracked = false;
      out.push_back(m);
      continue;
    }
    double dx = 0.0;
    double dy = 0.0;
    for (int level = top; level >= 0 && m.tracked; --level) {
      const double scale = 1.0 / (1 << level);
      const double px = pt.x * scale;
      const double py = pt.y * scale;
      const FloatImage& img_i = prev.image(level);
      const FloatImage& img_j = cur.image(level);

      // Template and its central-difference gradients from a window padded
      // by one pixel.
      img_i.sample_window(px, py, half + 1, padded.data());
      double gxx = 0, gxy = 0, gyy = 0;
      for (int wy = 0, k = 0; wy < side; ++wy) {
        const float* row = padded.data() + static_cast<std::size_t>(wy + 1) * (side + 2) + 1;
        for (int wx = 0; wx < side; ++wx, ++k) {
          const float ix = 0.5f * (row[wx + 1] - row[wx - 1]);
          const float iy = 0.5f * (row[wx + side + 2] - row[wx - side - 2]);
          win_i[k] = row[wx];
          win_gx[k] = ix;
          win_gy[k] = iy;
          gxx += ix * ix;
          gxy += ix * iy;
          gyy += iy * iy;
        }
      }
      const double det = gxx * gyy - gxy * gxy;
      const double min_eig =
          0.5 * (gxx + gyy - std::sqrt((gxx - gyy) * (gxx - gyy) + 4.0 * gxy * gxy)) / static_cast<double>(n_win);
      if (min_eig < params.min_eigen || det < 1e-12) {
        if (level == 0) m.tracked = false;
        if (level > 0) {
          dx *= 2.0;
          dy *= 2.0;
        }
        continue;
      }

      for (int it = 0; it < params.max_iterations; ++it) {
        const double qx = px + dx;
        const double qy = py + dy;
        if (qx < -half || qy < -half || qx > img_j.width - 1 + half || qy > img_j.height - 1 + half ||
            !std::isfinite(qx) || !std::isfinite(qy)) {
          if (level == 0) m.tracked = false;
          break;
        }
        img_j.sample_window(qx, qy, half, win_j.data());
        // Fixed lane partial sums so the reduction vectorizes with a
        // deterministic summation order.
        constexpr std::size_t kLanes = 8;
        float lx[kLanes] = {};
        float ly[kLanes] = {};
        std::size_t k = 0;
        for (; k + kLanes <= n_win; k += kLanes) {
          for (std::size_t l = 0; l < kLanes; ++l) {
            const float diff = win_i[k + l] - win_j[k + l];
            lx[l] += diff * win_gx[k + l];
            ly[l] += diff * win_gy[k + l];
          }
        }
        double bx = 0, by = 0;
        for (; k < n_win; ++k) {
          const double diff = win_i[k] - win_j[k];
          bx += diff * win_gx[k];
          by += diff * win_gy[k];
        }
        for (std::size_t l = 0; l < kLanes; ++l) {
          bx += lx[l];
          by += ly[l];
        }
        const double ux = (gyy * bx - gxy * by) / det;
        const double uy = (gxx * by - gxy * bx) / det;
        dx += ux;
        dy += uy;
        if (ux * ux + uy * uy < params.epsilon * params.epsilon) break;
      }
      if (level > 0) {
        dx *= 2.0;
        dy *= 2.0;
      }
    }
    m.dst = {pt.x + dx, pt.y + dy};
    if (!std::isfinite(m.dst.x) || !std::isfinite(m.dst.y) || m.dst.x < 0 || m.dst.y < 0 ||
        m.dst.x > cur.width() - 1 || m.dst.y > cur.height() - 1) {
      m.tracked = false;
    }
    out.push_back(m);
  }
  return out;
}

inline std::vector<PointMatch> lk_track(const Frame& prev, const Frame& cur, std::span<const Point2> points,
                                        const LkParams& params = {}) {
  if (!prev.same_size(cur)) {
    throw InvalidInput("lk_track: frame dimensions differ");
  }
  return lk_track(ImagePyramid(prev, params.levels), ImagePyramid(cur, params.levels), points, params);
}

// ---------------------------------------------------------------------------
// RANSAC homography

struct RansacParams {
  double reprojection_threshold = 3.0;  // px, inlier iff error < threshold
  double confidence = 0.995;
  int max_iterations = 2000;
};

struct HomographyEstimate {
  Homography h;
  std::vector<bool> inliers;  // one flag per input match
  std::size_t inlier_count = 0;
};

namespace detail {

// Similarity transform taking the points to zero mean and mean distance sqrt(2).
inline Eigen::Matrix3d normalizer(std::span<const Point2> pts) {
  double cx = 0, cy = 0;
  for (const Point2& p : pts) {
    cx += p.x;
    cy += p.y;
  }
  cx /= static_cast<double>(pts.size());
  cy /= static_cast<double>(pts.size());
  double mean_dist = 0;
  for (const Point2& p : pts) mean_dist += std::hypot(p.x - cx, p.y - cy);
  mean_dist /= static_cast<double>(pts.size());
  const double s = mean_dist > 0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0, -s * cx, 0, s, -s * cy, 0, 0, 1;
  return t;
}

// Normalized direct linear transform, least squares in the algebraic error.
// Returns false when the system is degenerate.
inline bool dlt(std::span<const Point2> src, std::span<const Point2> dst, Eigen::Matrix3d& out) {
  const Eigen::Matrix3d ts = normalizer(src);
  const Eigen::Matrix3d td = normalizer(dst);
  Eigen::Matrix<double, 9, 9> ata = Eigen::Matrix<double, 9, 9>::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double x = ts(0, 0) * src[i].x + ts(0, 2);
    const double y = ts(1, 1) * src[i].y + ts(1, 2);
    const double u = td(0, 0) * dst[i].x + td(0, 2);
    const double v = td(1, 1) * dst[i].y + td(1, 2);
    Eigen::Matrix<double, 9, 1> r1, r2;
    r1 << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    r2 << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
    ata.noalias() += r1 * r1.transpose();
    ata.noalias() += r2 * r2.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> es(ata);
  if (es.info() != Eigen::Success) return false;
  const auto evals = es.eigenvalues();
  // Rank deficiency beyond the one-dimensional null space means a degenerate
  // configuration (e.g. collinear points).
  if (evals(1) <= 1e-12 * std::max(evals(8), 1e-300)) return false;
  const Eigen::Matrix<double, 9, 1> h = es.eigenvectors().col(0);
  Eigen::Matrix3d hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d m = td.inverse() * hn * ts;
  if (!m.allFinite() || std::abs(m(2, 2)) < 1e-300) return false;
  m /= m(2, 2);
  if (std::abs(m.determinant()) < kSingularDetFloor) return false;
  out = m;
  return true;
}

inline double reprojection_error(const Eigen::Matrix3d& m, const Point2& s, const Point2& d) {
  const double w = m(2, 0) * s.x + m(2, 1) * s.y + m(2, 2);
  if (std::abs(w) < 1e-12) return std::numeric_limits<double>::infinity();
  const double u = (m(0, 0) * s.x + m(0, 1) * s.y + m(0, 2)) / w;
  const double v = (m(1, 0) * s.x + m(1, 1) * s.y + m(1, 2)) / w;
  return std::hypot(u - d.x, v - d.y);
}

inline bool collinear(const Point2& a, const Point2& b, const Point2& c) {
  const double cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
  return std::abs(cross) < 1e-6;
}

}  // namespace detail

/// RANSAC over 4-point samples, followed by least-squares refit on inliers.
/// Untracked matches are ignored and flagged as outliers.
template <class Rng>
HomographyEstimate estimate_homography(std::span<const PointMatch> matches, Rng& rng,
                                       const RansacParams& params = {}) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (matches[i].tracked) idx.push_back(i);
  }
  if (idx.size() < 4) {
    throw EstimationFailure("estimate_homography: fewer than 4 tracked matches");
  }
  const std::size_t n = idx.size();
  std::vector<Point2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = matches[idx[i]].src;
    dst[i] = matches[idx[i]].dst;
  }

  auto score = [&](const Eigen::Matrix3d& m, std::vector<char>& flags, double& err_sum) {
    std::size_t count = 0;
    err_sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double e = detail::reprojection_error(m, src[i], dst[i]);
      flags[i] = e < params.reprojection_threshold;
      if (flags[i]) {
        ++count;
        err_sum += e;
      }
    }
    return count;
  };

  Eigen::Matrix3d best = Eigen::Matrix3d::Identity();
  std::vector<char> best_flags(n, 0);
  std::size_t best_count = 0;
  double best_err = std::numeric_limits<double>::infinity();
  std::vector<char> flags(n, 0);

  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  long needed = params.max_iterations;
  for (long it = 0; it < needed && it < params.max_iterations; ++it) {
    std::array<std::size_t, 4> s{};
    for (int j = 0; j < 4; ++j) {
      bool fresh;
      do {
        s[j] = pick(rng);
        fresh = std::find(s.begin(), s.begin() + j, s[j]) == s.begin() + j;
      } while (!fresh);
    }
    const std::array<Point2, 4> ss = {src[s[0]], src[s[1]], src[s[2]], src[s[3]]};
    const std::array<Point2, 4> ds = {dst[s[0]], dst[s[1]], dst[s[2]], dst[s[3]]};
    bool degenerate = false;
    for (int a = 0; a < 4 && !degenerate; ++a) {
      for (int b = a + 1; b < 4 && !degenerate; ++b) {
        for (int c = b + 1; c < 4 && !degenerate; ++c) {
          degenerate = detail::collinear(ss[a], ss[b], ss[c]) || detail::collinear(ds[a], ds[b], ds[c]);
        }
      }
    }
    if (degenerate) continue;
    Eigen::Matrix3d m;
    if (!detail::dlt(ss, ds, m)) continue;
    double err = 0;
    const std::size_t count = score(m, flags, err);
    if (count > best_count || (count == best_count && count > 0 && err < best_err)) {
      best = m;
      best_flags = flags;
      best_count = count;
      best_err = err;
      const double w = static_cast<double>(count) / static_cast<double>(n);
      const double p_fail = 1.0 - std::pow(w, 4);
      if (p_fail <= 0.0) {
        needed = it + 1;
      } else {
        const double k = std::log(1.0 - params.confidence) / std::log(p_fail);
        if (std::isfinite(k)) needed = std::min<long>(needed, static_cast<long>(std::ceil(k)));
      }
    }
  }
  if (best_count < 4) {
    throw EstimationFailure("estimate_homography: no model with at least 4 inliers");
  }

  // Refit on the consensus set until it stops growing.
  for (int round = 0; round < 5; ++round) {
    std::vector<Point2> is, id;
    for (std::size_t i = 0; i < n; ++i) {
      if (best_flags[i]) {
        is.push_back(src[i]);
        id.push_back(dst[i]);
      }
    }
    Eigen::Matrix3d m;
    if (!detail::dlt(is, id, m)) break;
    double err = 0;
    const std::size_t count = score(m, flags, err);
    if (count < best_count) break;
    const bool same = flags == best_flags;
    best = m;
    best_flags = flags;
    best_count = count;
    if (same) break;
  }

  HomographyEstimate est{Homography(best), std::vector<bool>(matches.size(), false), best_count};
  for (std::size_t i = 0; i < n; ++i) est.inliers[idx[i]] = best_flags[i] != 0;
  return est;
}

// ---------------------------------------------------------------------------
// Warping

struct WarpResult {
  Frame image;
  BinaryMask valid;  // 1 where the source sample lay inside the source image
};

namespace detail {

// Source offsets (-1 when outside) and 1/256 bilinear weights for one output
// row. The last row/column steps back one pixel and puts all weight on the
// far neighbour, so reads stay inside the image.
inline void warp_row_weights(const float* src_x, const float* src_y, int w, int ht, std::int32_t* offset,
                             std::int32_t* wx, std::int32_t* wy) {
  const float max_x = static_cast<float>(w - 1);
  const float max_y = static_cast<float>(ht - 1);
  // Plain ternaries: std::max here stops GCC from vectorising the loop.
  const int last_x = w > 2 ? w - 2 : 0;
  const int last_y = ht > 2 ? ht - 2 : 0;
  for (int x = 0; x < w; ++x) {
    const float sx = src_x[x];
    const float sy = src_y[x];
    const bool ok = (sx >= 0.0f) & (sy >= 0.0f) & (sx <= max_x) & (sy <= max_y);
    const float cx = ok ? sx : 0.0f;
    const float cy = ok ? sy : 0.0f;
    const int ix = static_cast<int>(cx);
    const int iy = static_cast<int>(cy);
    const int x0 = ix < last_x ? ix : last_x;
    const int y0 = iy < last_y ? iy : last_y;
    wx[x] = static_cast<std::int32_t>((cx - static_cast<float>(x0)) * 256.0f + 0.5f);
    wy[x] = static_cast<std::int32_t>((cy - static_cast<float>(y0)) * 256.0f + 0.5f);
    offset[x] = ok ? y0 * w + x0 : -1;
  }
}

// Calls fn(i, value, valid) for every output pixel i (row-major) of `f` warped
// by `h`. value is the bilinear sample of f at h^-1 p with weights quantised
// to 1/256, rounded half up.
template <class Fn>
void for_each_warped(const Frame& f, const Homography& h, Fn&& fn) {
  if (std::abs(h.matrix().determinant()) < kSingularDetFloor) {
    throw InvalidInput("warp_perspective: singular homography");
  }
  const Eigen::Matrix3d inv = invert(h).matrix();
  const int w = f.width();
  const int ht = f.height();
  const std::uint8_t* src = f.pixels().data();
  std::vector<std::int32_t> scratch(3 * static_cast<std::size_t>(w));
  std::vector<float> coords(2 * static_cast<std::size_t>(w));
  // Raw pointers: byte stores through fn may alias anything, so keep the
  // loop state in locals. The loops are split so each one vectorises.
  std::int32_t* const offset = scratch.data();
  std::int32_t* const wx = offset + w;
  std::int32_t* const wy = wx + w;
  float* const src_x = coords.data();
  float* const src_y = src_x + w;
  // Neighbour steps; a 1-pixel-wide or -tall image has none.
  const std::int32_t step_x = w > 1 ? 1 : 0;
  const std::int32_t step_y = ht > 1 ? w : 0;
  const double a00 = inv(0, 0);
  const double a10 = inv(1, 0);
  const double a20 = inv(2, 0);
  std::size_t i = 0;
  for (int y = 0; y < ht; ++y) {
    const double nx = inv(0, 1) * y + inv(0, 2);
    const double ny = inv(1, 1) * y + inv(1, 2);
    const double nw = inv(2, 1) * y + inv(2, 2);
    for (int x = 0; x < w; ++x) {
      const double r = 1.0 / (nw + a20 * x);
      src_x[x] = static_cast<float>((nx + a00 * x) * r);
      src_y[x] = static_cast<float>((ny + a10 * x) * r);
    }
    warp_row_weights(src_x, src_y, w, ht, offset, wx, wy);
    for (int x = 0; x < w; ++x, ++i) {
      const std::int32_t off = offset[x];
      if (off < 0) {
        fn(i, std::uint8_t{0}, false);
        continue;
      }
      const std::int32_t tx = wx[x];
      const std::int32_t ty = wy[x];
      const std::uint8_t* r0 = src + off;
      const std::uint8_t* r1 = r0 + step_y;
      const std::int32_t top = r0[0] * 256 + tx * (r0[step_x] - r0[0]);
      const std::int32_t bot = r1[0] * 256 + tx * (r1[step_x] - r1[0]);
      fn(i, static_cast<std::uint8_t>((top * 256 + ty * (bot - top) + 32768) >> 16), true);
    }
  }
}

}  // namespace detail

/// Output pixel p samples `f` at h^-1 p. Pixels whose source falls outside
/// the image are 0 and flagged invalid.
inline WarpResult warp_perspective(const Frame& f, const Homography& h) {
  WarpResult r{Frame(f.width(), f.height(), f.index()), BinaryMask(f.width(), f.height())};
  std::uint8_t* const out = r.image.pixels().data();
  std::uint8_t* const valid = r.valid.bits().data();
  detail::for_each_warped(f, h, [out, valid](std::size_t i, std::uint8_t v, bool ok) {
    out[i] = v;
    valid[i] = ok ? 1 : 0;
  });
  return r;
}

// ---------------------------------------------------------------------------
// Grid -> LK -> RANSAC in one call

struct AlignParams {
  int grid_cols = 30;
  int grid_rows = 20;
  LkParams lk;
  RansacParams ransac;
};

/// Homography mapping `from` coordinates into `to` coordinates, estimated by
/// tracking a keypoint grid sampled in `from`.
template <class Rng>
HomographyEstimate estimate_alignment(const ImagePyramid& from, const ImagePyramid& to, Rng& rng,
                                      const AlignParams& params = {}) {
  const auto grid = sample_grid(from.width(), from.height(), params.grid_cols, params.grid_rows);
  const auto matches = lk_track(from, to, grid, params.lk);
  return estimate_homography(std::span<const PointMatch>(matches), rng, params.ransac);
}

}  // namespace mgd
