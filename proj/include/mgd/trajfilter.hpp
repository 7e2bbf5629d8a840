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

// Trajectory classification. A track is a potential mover when its box three
// observations ago, carried into the current frame by the accumulated camera
// homography, lies far enough from its current box.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>

#include "mgd/align.hpp"
#include "mgd/error.hpp"
#include "mgd/track.hpp"

namespace mgd {

enum class MetricMode {
  kEnclosing,  // centre distance / diagonal of the box enclosing both
  kSelfDiag,   // centre distance / diagonal of the newer box
};

inline std::string_view to_string(MetricMode m) {
  return m == MetricMode::kEnclosing ? "enclosing" : "self_diag";
}

inline std::optional<MetricMode> parse_metric_mode(std::string_view s) {
  if (s == "enclosing") return MetricMode::kEnclosing;
  if (s == "self_diag") return MetricMode::kSelfDiag;
  return std::nullopt;
}

/// Centre distance normalised by an enclosing diagonal. For boxes with
/// positive extents the enclosing mode is strictly below 1. A zero
/// denominator yields 0.
inline double distance_metric(const BoundingBox& a, const BoundingBox& b, MetricMode mode = MetricMode::kEnclosing) {
  const Point2 ca = a.center();
  const Point2 cb = b.center();
  const double rho = std::hypot(ca.x - cb.x, ca.y - cb.y);
  double d = 0.0;
  if (mode == MetricMode::kEnclosing) {
    const double w = std::max(a.right(), b.right()) - std::min(a.x, b.x);
    const double h = std::max(a.bottom(), b.bottom()) - std::min(a.y, b.y);
    d = std::hypot(w, h);
  } else {
    d = std::hypot(b.w, b.h);
  }
  return d > 0.0 ? rho / d : 0.0;
}

/// Per-frame homographies H_i mapping frame (i - stride) into frame i.
class HomographyBuffer {
 public:
  explicit HomographyBuffer(std::size_t capacity = 32, int stride = 1) : capacity_(capacity), stride_(stride) {
    if (capacity == 0 || stride < 1) {
      throw InvalidInput("HomographyBuffer: capacity and stride must be positive");
    }
  }

  /// Appends H for `frame_index`. Indices must advance by exactly the stride;
  /// a jump (e.g. after an alignment failure) discards older entries.
  void push(std::int64_t frame_index, const Homography& h) {
    if (!entries_.empty() && frame_index != entries_.back().frame_index + stride_) {
      if (frame_index <= entries_.back().frame_index) {
        throw InvalidInput("HomographyBuffer: frame indices must increase");
      }
      entries_.clear();
    }
    entries_.push_back({frame_index, h});
    while (entries_.size() > capacity_) entries_.pop_front();
  }

  /// Marks `frame_index` as having no homography. Compositions spanning it
  /// become unavailable.
  void mark_missing(std::int64_t frame_index) {
    if (!entries_.empty() && frame_index <= entries_.back().frame_index) {
      throw InvalidInput("HomographyBuffer: frame indices must increase");
    }
    entries_.clear();
  }

  std::optional<Homography> at(std::int64_t frame_index) const {
    if (entries_.empty()) return std::nullopt;
    const std::int64_t off = frame_index - entries_.front().frame_index;
    if (off < 0 || off % stride_ != 0) return std::nullopt;
    const auto i = static_cast<std::size_t>(off / stride_);
    if (i >= entries_.size()) return std::nullopt;
    return entries_[i].h;
  }

  int stride() const { return stride_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }

 private:
  struct Entry {
    std::int64_t frame_index;
    Homography h;
  };
  std::size_t capacity_;
  int stride_;
  std::deque<Entry> entries_;
};

/// Product H_to * ... * H_(from+stride): maps `from_index` coordinates into
/// `to_index` coordinates. Throws Unavailable when a step is missing.
inline Homography composed_homography(const HomographyBuffer& buf, std::int64_t from_index, std::int64_t to_index) {
  if (from_index == to_index) return Homography::identity();
  if (from_index > to_index || (to_index - from_index) % buf.stride() != 0) {
    throw Unavailable("composed_homography: frames are not joined by whole strides");
  }
  Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
  for (std::int64_t i = from_index + buf.stride(); i <= to_index; i += buf.stride()) {
    const auto h = buf.at(i);
    if (!h) {
      throw Unavailable("composed_homography: missing homography for frame " + std::to_string(i));
    }
    m = h->matrix() * m;
  }
  return Homography(m);
}

struct TrajectoryParams {
  double tau = 0.5;
  MetricMode mode = MetricMode::kEnclosing;
  int lookback = 3;  // compare s_N with s_(N - lookback)
};

struct TrajectoryVerdict {
  int track_id = 0;
  int probability = 0;  // 0 or 1
  double metric_value = 0.0;
};

inline TrajectoryVerdict classify(const Track& track, const HomographyBuffer& buf, const TrajectoryParams& params = {}) {
  TrajectoryVerdict v{track.id, 0, 0.0};
  const auto n = static_cast<std::ptrdiff_t>(track.history.size());
  if (n < params.lookback + 1) return v;
  const HistoryEntry& oldest = track.history[static_cast<std::size_t>(n - 1 - params.lookback)];
  const HistoryEntry& newest = track.history.back();
  try {
    const Homography h = composed_homography(buf, oldest.frame_index, newest.frame_index);
    v.metric_value = distance_metric(transform_box(h, oldest.box), newest.box, params.mode);
  } catch (const Unavailable&) {
    return v;
  }
  v.probability = v.metric_value >= params.tau ? 1 : 0;
  return v;
}

}  // namespace mgd
