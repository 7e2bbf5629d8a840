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

// Motion feature enhancement: ego-motion compensated multi-frame differencing
// and blob extraction.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgd/align.hpp"
#include "mgd/error.hpp"
#include "mgd/imgproc.hpp"

namespace mgd {

enum class FusionMode { kTwoFrame, kThreeFrameAnd, kThreeFrameOr };

inline std::string_view to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kTwoFrame: return "two_frame";
    case FusionMode::kThreeFrameAnd: return "three_frame_and";
    case FusionMode::kThreeFrameOr: return "three_frame_or";
  }
  return "?";
}

inline std::optional<FusionMode> parse_fusion_mode(std::string_view s) {
  if (s == "two_frame") return FusionMode::kTwoFrame;
  if (s == "three_frame_and") return FusionMode::kThreeFrameAnd;
  if (s == "three_frame_or") return FusionMode::kThreeFrameOr;
  return std::nullopt;
}

struct MfeConfig {
  int diff_threshold = 5;
  FusionMode fusion = FusionMode::kThreeFrameOr;
  int morph_iterations = 1;
  int min_blob_area = 15;
};

struct MotionCandidates {
  std::int64_t frame_index = 0;
  std::vector<BoundingBox> boxes;
  BinaryMask fused;  // E_t after warp-validity masking, before morphology
  BinaryMask mask;   // fused mask after open/close; boxes are blobs of this
  bool alignment_degraded = false;
};

/// Open, close, label, drop blobs under `min_blob_area` pixels.
inline std::vector<BoundingBox> post_process(const BinaryMask& mask, const MfeConfig& cfg,
                                             BinaryMask* cleaned = nullptr) {
  BinaryMask m = morph_close(morph_open(mask, cfg.morph_iterations), cfg.morph_iterations);
  std::vector<BoundingBox> boxes;
  for (const Component& c : connected_components(m)) {
    if (c.area >= cfg.min_blob_area) boxes.push_back(c.box);
  }
  if (cleaned) *cleaned = std::move(m);
  return boxes;
}

namespace detail {

// Binarized |cur - warp(other)|, forced to background where the warp had no
// source pixel. Also ANDs the validity into `valid_acc`.
inline BinaryMask masked_difference(const Frame& cur, const Frame& other, const Homography& h, int threshold,
                                    BinaryMask& valid_acc) {
  BinaryMask d(cur.width(), cur.height());
  std::uint8_t* const bits = d.bits().data();
  std::uint8_t* const acc = valid_acc.bits().data();
  const std::uint8_t* const c = cur.pixels().data();
  detail::for_each_warped(other, h, [bits, acc, c, threshold](std::size_t i, std::uint8_t v, bool ok) {
    const int diff = std::abs(static_cast<int>(c[i]) - static_cast<int>(v));
    bits[i] = ok && diff >= threshold ? 1 : 0;
    acc[i] &= ok ? 1 : 0;
  });
  return d;
}

// Drops boxes covering any pixel where `valid` is 0.
inline std::vector<BoundingBox> drop_invalid(std::vector<BoundingBox> boxes, const BinaryMask& valid) {
  const std::uint8_t* v = valid.bits().data();
  const int w = valid.width();
  std::erase_if(boxes, [&](const BoundingBox& b) {
    const int x0 = static_cast<int>(b.x);
    const int y0 = static_cast<int>(b.y);
    const int x1 = static_cast<int>(b.x + b.w);
    const int y1 = static_cast<int>(b.y + b.h);
    for (int y = y0; y < y1; ++y) {
      const std::uint8_t* row = v + static_cast<std::size_t>(y) * w;
      if (std::find(row + x0, row + x1, std::uint8_t{0}) != row + x1) return true;
    }
    return false;
  });
  return boxes;
}

inline void check_triplet(const Frame& prev, const Frame& cur, const Frame* next) {
  if (!prev.same_size(cur) || (next && !next->same_size(cur))) {
    throw InvalidInput("enhance: frame dimensions differ");
  }
  const std::int64_t k = cur.index() - prev.index();
  if (k < 1) {
    throw InvalidInput("enhance: previous frame index must precede current");
  }
  if (next && next->index() - cur.index() != k) {
    throw InvalidInput("enhance: next frame index must be current + k");
  }
}

inline MotionCandidates finish(std::int64_t index, BinaryMask fused, const BinaryMask& valid, const MfeConfig& cfg) {
  MotionCandidates mc;
  mc.frame_index = index;
  mc.boxes = drop_invalid(post_process(fused, cfg, &mc.mask), valid);
  mc.fused = std::move(fused);
  return mc;
}

}  // namespace detail

/// Aligns prev (t-k) and next (t+k) onto cur (t) through h_prev / h_next,
/// differences, fuses per `cfg.fusion` and extracts candidate boxes.
/// `next` and `h_next` are ignored in two-frame mode.
inline MotionCandidates enhance(const Frame& prev, const Frame& cur, const Frame& next, const Homography& h_prev,
                                const Homography& h_next, const MfeConfig& cfg) {
  const bool use_next = cfg.fusion != FusionMode::kTwoFrame;
  detail::check_triplet(prev, cur, use_next ? &next : nullptr);
  BinaryMask valid(cur.width(), cur.height(), true);
  BinaryMask d12 = detail::masked_difference(cur, prev, h_prev, cfg.diff_threshold, valid);
  if (!use_next) {
    return detail::finish(cur.index(), std::move(d12), valid, cfg);
  }
  BinaryMask d23 = detail::masked_difference(cur, next, h_next, cfg.diff_threshold, valid);
  BinaryMask fused = cfg.fusion == FusionMode::kThreeFrameAnd ? mask_and(d12, d23) : mask_or(d12, d23);
  // Pixels invalid in either warp are background.
  for (std::size_t i = 0; i < fused.bits().size(); ++i) fused.bits()[i] &= valid.bits()[i];
  return detail::finish(cur.index(), std::move(fused), valid, cfg);
}

/// Previous-pair only; used for stream tails where t+k does not exist.
inline MotionCandidates enhance_two_frame(const Frame& prev, const Frame& cur, const Homography& h_prev,
                                          const MfeConfig& cfg) {
  detail::check_triplet(prev, cur, nullptr);
  BinaryMask valid(cur.width(), cur.height(), true);
  BinaryMask d12 = detail::masked_difference(cur, prev, h_prev, cfg.diff_threshold, valid);
  return detail::finish(cur.index(), std::move(d12), valid, cfg);
}

}  // namespace mgd
