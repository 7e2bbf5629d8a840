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

// Synthetic moving-camera clips with ground truth. The background is smooth
// value noise fixed in world coordinates and viewed through a per-frame
// camera homography. Targets move in image space. Distractors are anchored to
// the world but jitter against it, the way parallax and swaying clutter do.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mgd/align.hpp"
#include "mgd/error.hpp"
#include "mgd/imgproc.hpp"
#include "mgd/io.hpp"

namespace mgd {

enum class PathType { kLinear, kSinusoidal };
enum class DistractorKind { kParallaxSprite, kSwayingBlob };

struct CameraMotion {
  double tx = 0.0;        // apparent background shift, px/frame
  double ty = 0.0;
  double rotation = 0.0;  // deg/frame about the image centre
  double zoom = 0.0;      // relative scale change per frame
};

struct TargetSpec {
  int size = 8;
  double speed = 3.0;  // px/frame
  PathType path = PathType::kLinear;
  int contrast = -90;  // added to the background under the target
};

struct DistractorSpec {
  int size = 12;
  double amplitude = 1.0;  // px
  DistractorKind kind = DistractorKind::kParallaxSprite;
  int contrast = 60;
  double period = 8.0;  // frames per oscillation
};

struct SynthConfig {
  int width = 640;
  int height = 480;
  int length = 100;
  CameraMotion camera;
  double texture_scale = 24.0;  // lattice spacing of the coarsest octave, px
  double texture_amplitude = 60.0;
  std::vector<TargetSpec> targets;
  std::vector<DistractorSpec> distractors;

  void validate() const {
    if (width < 16 || height < 16 || length < 1) throw InvalidInput("SynthConfig: clip too small");
    if (texture_scale <= 0) throw InvalidInput("SynthConfig: texture_scale must be positive");
    for (const TargetSpec& t : targets) {
      if (t.size < 3) throw InvalidInput("SynthConfig: target size must be >= 3");
      if (t.speed < 0) throw InvalidInput("SynthConfig: target speed must be >= 0");
      if (2 * t.size >= std::min(width, height)) throw InvalidInput("SynthConfig: target too large for frame");
    }
    for (const DistractorSpec& d : distractors) {
      if (d.size < 3) throw InvalidInput("SynthConfig: distractor size must be >= 3");
      if (d.amplitude < 0 || d.period <= 0) throw InvalidInput("SynthConfig: bad distractor oscillation");
    }
  }
};

struct SynthClip {
  std::vector<Frame> frames;
  GroundTruth truth;
  GroundTruth distractor_truth;
  std::vector<Homography> camera;  // world -> image for each frame
};

namespace detail {

inline std::uint32_t hash3(std::int64_t x, std::int64_t y, std::uint64_t seed) {
  std::uint64_t h = seed * 0x9E3779B97F4A7C15ull;
  h ^= static_cast<std::uint64_t>(x) * 0xC2B2AE3D27D4EB4Full;
  h = (h ^ (h >> 29)) * 0xBF58476D1CE4E5B9ull;
  h ^= static_cast<std::uint64_t>(y) * 0x165667B19E3779F9ull;
  h = (h ^ (h >> 32)) * 0x94D049BB133111EBull;
  h ^= h >> 31;
  return static_cast<std::uint32_t>(h >> 32);
}

/// Quintic-interpolated lattice noise in [-1, 1].
inline double value_noise(double x, double y, std::uint64_t seed) {
  const double fx = std::floor(x);
  const double fy = std::floor(y);
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  auto fade = [](double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); };
  const double u = fade(x - fx);
  const double v = fade(y - fy);
  auto lat = [&](std::int64_t a, std::int64_t b) { return hash3(a, b, seed) * (2.0 / 4294967295.0) - 1.0; };
  const double a = lat(ix, iy) + u * (lat(ix + 1, iy) - lat(ix, iy));
  const double b = lat(ix, iy + 1) + u * (lat(ix + 1, iy + 1) - lat(ix, iy + 1));
  return a + v * (b - a);
}

/// Two octaves, normalised to [-1, 1].
inline double texture(double x, double y, double scale, std::uint64_t seed) {
  return (value_noise(x / scale, y / scale, seed) * 2.0 + value_noise(x * 2.0 / scale, y * 2.0 / scale, seed + 1)) / 3.0;
}

inline std::uint8_t clamp_px(double v) {
  v = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
  return static_cast<std::uint8_t>(v + 0.5);
}

// Lattice values of one noise octave over a rectangle, falling back to the
// hash outside it. Same values as value_noise().
class NoiseLattice {
 public:
  NoiseLattice(double x0, double y0, double x1, double y1, std::uint64_t seed) : seed_(seed) {
    ix0_ = static_cast<std::int64_t>(std::floor(x0)) - 1;
    iy0_ = static_cast<std::int64_t>(std::floor(y0)) - 1;
    nx_ = static_cast<std::int64_t>(std::ceil(x1)) + 2 - ix0_;
    ny_ = static_cast<std::int64_t>(std::ceil(y1)) + 2 - iy0_;
    if (nx_ <= 0 || ny_ <= 0 || nx_ * ny_ > (std::int64_t{1} << 24)) {
      nx_ = ny_ = 0;
      return;
    }
    values_.resize(static_cast<std::size_t>(nx_ * ny_));
    for (std::int64_t j = 0; j < ny_; ++j) {
      for (std::int64_t i = 0; i < nx_; ++i) values_[static_cast<std::size_t>(j * nx_ + i)] = hashed(ix0_ + i, iy0_ + j);
    }
  }

  double operator()(double x, double y) const {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx);
    const auto iy = static_cast<std::int64_t>(fy);
    auto fade = [](double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); };
    const double u = fade(x - fx);
    const double v = fade(y - fy);
    double l00, l10, l01, l11;
    const std::int64_t i = ix - ix0_;
    const std::int64_t j = iy - iy0_;
    if (i >= 0 && j >= 0 && i + 1 < nx_ && j + 1 < ny_) {
      const double* p = values_.data() + j * nx_ + i;
      l00 = p[0];
      l10 = p[1];
      l01 = p[nx_];
      l11 = p[nx_ + 1];
    } else {
      l00 = hashed(ix, iy);
      l10 = hashed(ix + 1, iy);
      l01 = hashed(ix, iy + 1);
      l11 = hashed(ix + 1, iy + 1);
    }
    const double a = l00 + u * (l10 - l00);
    const double b = l01 + u * (l11 - l01);
    return a + v * (b - a);
  }

 private:
  double hashed(std::int64_t x, std::int64_t y) const { return hash3(x, y, seed_) * (2.0 / 4294967295.0) - 1.0; }

  std::uint64_t seed_;
  std::int64_t ix0_ = 0, iy0_ = 0, nx_ = 0, ny_ = 0;
  std::vector<double> values_;
};

}  // namespace detail

/// World -> image homography of frame t.
inline Homography camera_at(const SynthConfig& cfg, int t) {
  const Point2 c{0.5 * cfg.width, 0.5 * cfg.height};
  const double s = std::pow(1.0 + cfg.camera.zoom, t);
  Eigen::Matrix3d zoom;
  zoom << s, 0, c.x - s * c.x, 0, s, c.y - s * c.y, 0, 0, 1;
  const Homography rot = Homography::rigid(cfg.camera.rotation * t, c, cfg.camera.tx * t, cfg.camera.ty * t);
  return compose(rot, Homography(zoom));
}

/// Renders the clip. Deterministic given (cfg, seed).
inline SynthClip synth_generate(const SynthConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SynthClip clip;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  struct TargetState {
    double x, y, vx, vy, phase;
  };
  std::vector<TargetState> targets;
  for (const TargetSpec& t : cfg.targets) {
    const double margin = t.size + 4.0;
    const double angle = unit(rng) * 2.0 * std::numbers::pi;
    targets.push_back({margin + unit(rng) * (cfg.width - 2 * margin - t.size),
                       margin + unit(rng) * (cfg.height - 2 * margin - t.size), t.speed * std::cos(angle),
                       t.speed * std::sin(angle), unit(rng) * 2.0 * std::numbers::pi});
  }
  struct DistractorState {
    Point2 world;
    double phase;
    std::uint64_t pattern_seed;
  };
  std::vector<DistractorState> distractors;
  const Homography cam0_inv = invert(camera_at(cfg, 0));
  for (const DistractorSpec& d : cfg.distractors) {
    const double margin = d.size + 8.0;
    const Point2 p{margin + unit(rng) * (cfg.width - 2 * margin), margin + unit(rng) * (cfg.height - 2 * margin)};
    distractors.push_back({cam0_inv.apply(p), unit(rng) * 2.0 * std::numbers::pi, rng()});
  }
  const std::uint64_t bg_seed = rng();

  // World extent seen by the camera over the clip, for the lattice caches.
  double wx0 = 1e300, wy0 = 1e300, wx1 = -1e300, wy1 = -1e300;
  for (int t = 0; t < cfg.length; ++t) {
    const Homography inv = invert(camera_at(cfg, t));
    for (const Point2 c : {Point2{0, 0}, Point2{static_cast<double>(cfg.width), 0},
                           Point2{0, static_cast<double>(cfg.height)},
                           Point2{static_cast<double>(cfg.width), static_cast<double>(cfg.height)}}) {
      const Point2 w = inv.apply(c);
      wx0 = std::min(wx0, w.x);
      wy0 = std::min(wy0, w.y);
      wx1 = std::max(wx1, w.x);
      wy1 = std::max(wy1, w.y);
    }
  }
  const double sc = cfg.texture_scale;
  const detail::NoiseLattice coarse(wx0 / sc, wy0 / sc, wx1 / sc, wy1 / sc, bg_seed);
  const detail::NoiseLattice fine(2 * wx0 / sc, 2 * wy0 / sc, 2 * wx1 / sc, 2 * wy1 / sc, bg_seed + 1);

  for (int t = 0; t < cfg.length; ++t) {
    const Homography cam = camera_at(cfg, t);
    const Eigen::Matrix3d inv = invert(cam).matrix();
    Frame f(cfg.width, cfg.height, t);
    for (int y = 0; y < cfg.height; ++y) {
      auto row = f.row(y);
      for (int x = 0; x < cfg.width; ++x) {
        const double w = inv(2, 0) * x + inv(2, 1) * y + inv(2, 2);
        const double wx = (inv(0, 0) * x + inv(0, 1) * y + inv(0, 2)) / w;
        const double wy = (inv(1, 0) * x + inv(1, 1) * y + inv(1, 2)) / w;
        const double tex = (coarse(wx / sc, wy / sc) * 2.0 + fine(wx * 2.0 / sc, wy * 2.0 / sc)) / 3.0;
        row[x] = detail::clamp_px(128.0 + cfg.texture_amplitude * tex);
      }
    }

    // Distractors: world-anchored, oscillating against the background.
    for (std::size_t i = 0; i < distractors.size(); ++i) {
      const DistractorSpec& spec = cfg.distractors[i];
      const DistractorState& st = distractors[i];
      const double osc = spec.amplitude * std::sin(2.0 * std::numbers::pi * t / spec.period + st.phase);
      const Point2 anchor = cam.apply(st.world);
      const double ox = anchor.x + osc;
      const double oy = anchor.y + (spec.kind == DistractorKind::kSwayingBlob ? 0.5 * osc : 0.0);
      const int x0 = static_cast<int>(std::floor(ox));
      const int y0 = static_cast<int>(std::floor(oy));
      const int x1 = static_cast<int>(std::ceil(ox + spec.size));
      const int y1 = static_cast<int>(std::ceil(oy + spec.size));
      for (int y = std::max(y0, 0); y < std::min(y1, cfg.height); ++y) {
        for (int x = std::max(x0, 0); x < std::min(x1, cfg.width); ++x) {
          const double lx = x - ox;
          const double ly = y - oy;
          if (lx < 0 || ly < 0 || lx >= spec.size || ly >= spec.size) continue;
          double delta = 0.0;
          if (spec.kind == DistractorKind::kParallaxSprite) {
            delta = spec.contrast * detail::value_noise(lx / 3.0, ly / 3.0, st.pattern_seed);
          } else {
            const double r = 0.5 * spec.size;
            const double d = std::hypot(lx - r, ly - r) / r;
            delta = d < 1.0 ? spec.contrast * (1.0 - d * d) : 0.0;
          }
          f.at(x, y) = detail::clamp_px(f.at(x, y) + delta);
        }
      }
      const int bx0 = std::clamp(x0, 0, cfg.width - 1);
      const int by0 = std::clamp(y0, 0, cfg.height - 1);
      const int bx1 = std::clamp(x1, bx0 + 1, cfg.width);
      const int by1 = std::clamp(y1, by0 + 1, cfg.height);
      if (x1 > 0 && y1 > 0 && x0 < cfg.width && y0 < cfg.height) {
        clip.distractor_truth[t].push_back(
            {static_cast<int>(i),
             BoundingBox{static_cast<double>(bx0), static_cast<double>(by0), static_cast<double>(bx1 - bx0),
                         static_cast<double>(by1 - by0)}});
      }
    }

    // Targets: image-space squares bouncing off the borders.
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const TargetSpec& spec = cfg.targets[i];
      TargetState& st = targets[i];
      double px = st.x;
      double py = st.y;
      if (spec.path == PathType::kSinusoidal) {
        const double amp = 2.0 * spec.size;
        const double norm = std::max(std::hypot(st.vx, st.vy), 1e-9);
        const double off = amp * std::sin(2.0 * std::numbers::pi * t / 60.0 + st.phase);
        px += -st.vy / norm * off;
        py += st.vx / norm * off;
      }
      const int bx = std::clamp(static_cast<int>(std::lround(px)), 0, cfg.width - spec.size);
      const int by = std::clamp(static_cast<int>(std::lround(py)), 0, cfg.height - spec.size);
      for (int y = by; y < by + spec.size; ++y) {
        for (int x = bx; x < bx + spec.size; ++x) f.at(x, y) = detail::clamp_px(f.at(x, y) + spec.contrast);
      }
      clip.truth[t].push_back({static_cast<int>(i), BoundingBox{static_cast<double>(bx), static_cast<double>(by),
                                                                 static_cast<double>(spec.size),
                                                                 static_cast<double>(spec.size)}});
      // Advance, reflecting at a margin that keeps sinusoidal paths inside.
      const double margin = spec.path == PathType::kSinusoidal ? 2.0 * spec.size + 2.0 : 2.0;
      st.x += st.vx;
      st.y += st.vy;
      if (st.x < margin || st.x > cfg.width - spec.size - margin) {
        st.vx = -st.vx;
        st.x = std::clamp(st.x, margin, cfg.width - spec.size - margin);
      }
      if (st.y < margin || st.y > cfg.height - spec.size - margin) {
        st.vy = -st.vy;
        st.y = std::clamp(st.y, margin, cfg.height - spec.size - margin);
      }
    }
    clip.frames.push_back(std::move(f));
    clip.camera.push_back(cam);
  }
  return clip;
}

/// Reads a SynthConfig from `key = value` lines. Repeated `target` and
/// `distractor` lines add objects:
///   target = <size> <speed> <linear|sinusoidal> <contrast>
///   distractor = <size> <amplitude> <parallax_sprite|swaying_blob> <contrast> <period>
inline SynthConfig parse_synth_config(std::istream& in, const std::string& source = "<synth>") {
  SynthConfig cfg;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw.substr(0, raw.find('#'));
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    std::istringstream val(trim(line.substr(eq + 1)));
    auto fail = [&] { throw ParseError(source, line_no, "invalid value for '" + key + "'"); };
    auto read = [&](auto& v) {
      if (!(val >> v)) fail();
    };
    if (key == "width") read(cfg.width);
    else if (key == "height") read(cfg.height);
    else if (key == "length") read(cfg.length);
    else if (key == "camera_tx") read(cfg.camera.tx);
    else if (key == "camera_ty") read(cfg.camera.ty);
    else if (key == "camera_rotation") read(cfg.camera.rotation);
    else if (key == "camera_zoom") read(cfg.camera.zoom);
    else if (key == "texture_scale") read(cfg.texture_scale);
    else if (key == "texture_amplitude") read(cfg.texture_amplitude);
    else if (key == "target") {
      TargetSpec t;
      std::string path;
      read(t.size);
      read(t.speed);
      read(path);
      read(t.contrast);
      if (path == "linear") t.path = PathType::kLinear;
      else if (path == "sinusoidal") t.path = PathType::kSinusoidal;
      else fail();
      cfg.targets.push_back(t);
    } else if (key == "distractor") {
      DistractorSpec d;
      std::string kind;
      read(d.size);
      read(d.amplitude);
      read(kind);
      read(d.contrast);
      read(d.period);
      if (kind == "parallax_sprite") d.kind = DistractorKind::kParallaxSprite;
      else if (kind == "swaying_blob") d.kind = DistractorKind::kSwayingBlob;
      else fail();
      cfg.distractors.push_back(d);
    } else {
      throw ParseError(source, line_no, "unknown key '" + key + "'");
    }
    std::string rest;
    if (val >> rest) fail();
  }
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(source, 0, e.what());
  }
  return cfg;
}

}  // namespace mgd
