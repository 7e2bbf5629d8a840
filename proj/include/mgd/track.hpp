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

// SORT-style tracking: constant-velocity Kalman filter over (u, v, s, r),
// 1 - IoU Hungarian association with an IoU gate, and track lifecycle.

#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <vector>

#include "mgd/imgproc.hpp"

namespace mgd {

inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Minimum-cost assignment for a rectangular cost matrix (row-major,
/// rows x cols). Returns, for each row, its column or -1. Every row is
/// assigned when rows <= cols, otherwise every column is.
inline std::vector<int> hungarian(const std::vector<double>& cost, int rows, int cols) {
  std::vector<int> assignment(static_cast<std::size_t>(std::max(rows, 0)), -1);
  if (rows <= 0 || cols <= 0) return assignment;
  const bool transposed = rows > cols;
  const int n = transposed ? cols : rows;  // n <= m
  const int m = transposed ? rows : cols;
  auto c = [&](int i, int j) {
    return transposed ? cost[static_cast<std::size_t>(j) * cols + i] : cost[static_cast<std::size_t>(i) * cols + j];
  };

  // Shortest augmenting path with potentials (1-based, e-maxx formulation).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = c(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  for (int j = 1; j <= m; ++j) {
    if (p[j] == 0) continue;
    if (transposed) {
      assignment[static_cast<std::size_t>(j - 1)] = p[j] - 1;
    } else {
      assignment[static_cast<std::size_t>(p[j] - 1)] = j - 1;
    }
  }
  return assignment;
}

/// Noise constants of the constant-velocity box filter.
struct KalmanNoise {
  double measurement_pos = 1.0;     // R for u, v
  double measurement_shape = 10.0;  // R for s, r
  double initial_pos = 10.0;        // P0 for u, v, s, r
  double initial_velocity = 1e4;    // P0 for du, dv, ds
  double process_pos = 1.0;         // Q for u, v, s, r
  double process_velocity = 1e-2;   // Q for du, dv
  double process_area_velocity = 1e-4;  // Q for ds
};

/// State x = [u, v, s, r, du, dv, ds] with 7x7 covariance.
class KalmanBoxFilter {
 public:
  using State = Eigen::Matrix<double, 7, 1>;
  using Cov = Eigen::Matrix<double, 7, 7>;

  explicit KalmanBoxFilter(const BoundingBox& box, const KalmanNoise& noise = {}) {
    x_.setZero();
    x_.head<4>() = to_measurement(box);
    p_.setZero();
    p_.diagonal() << noise.initial_pos, noise.initial_pos, noise.initial_pos, noise.initial_pos,
        noise.initial_velocity, noise.initial_velocity, noise.initial_velocity;
    q_.setZero();
    q_.diagonal() << noise.process_pos, noise.process_pos, noise.process_pos, noise.process_pos,
        noise.process_velocity, noise.process_velocity, noise.process_area_velocity;
    r_.setZero();
    r_.diagonal() << noise.measurement_pos, noise.measurement_pos, noise.measurement_shape, noise.measurement_shape;
    f_.setIdentity();
    f_(0, 4) = f_(1, 5) = f_(2, 6) = 1.0;
  }

  void predict() {
    if (x_(2) + x_(6) <= 0.0) x_(6) = 0.0;
    x_ = f_ * x_;
    p_ = f_ * p_ * f_.transpose() + q_;
    p_ = 0.5 * (p_ + p_.transpose());
    if (x_(2) < 1.0) x_(2) = 1.0;
  }

  void update(const BoundingBox& box) {
    const Eigen::Vector4d z = to_measurement(box);
    const Eigen::Vector4d y = z - x_.head<4>();
    const Eigen::Matrix4d s = p_.topLeftCorner<4, 4>() + r_;
    const Eigen::Matrix<double, 7, 4> k = p_.leftCols<4>() * s.inverse();
    x_ += k * y;
    // Joseph form keeps the covariance symmetric positive semi-definite.
    Eigen::Matrix<double, 7, 7> ikh = Cov::Identity();
    ikh.leftCols<4>() -= k;
    p_ = ikh * p_ * ikh.transpose() + k * r_ * k.transpose();
    p_ = 0.5 * (p_ + p_.transpose());
    if (x_(2) < 1.0) x_(2) = 1.0;
    if (x_(3) <= 0.0) x_(3) = z(3);
  }

  BoundingBox box() const {
    const double s = std::max(x_(2), 1.0);
    const double r = x_(3);
    const double w = std::sqrt(s * r);
    const double h = s / w;
    return {x_(0) - 0.5 * w, x_(1) - 0.5 * h, w, h};
  }

  const State& state() const { return x_; }
  const Cov& covariance() const { return p_; }

  static Eigen::Vector4d to_measurement(const BoundingBox& b) {
    return {b.x + 0.5 * b.w, b.y + 0.5 * b.h, b.w * b.h, b.w / b.h};
  }

 private:
  State x_;
  Cov p_;
  Cov q_;
  Eigen::Matrix4d r_;
  Cov f_;
};

struct HistoryEntry {
  std::int64_t frame_index = 0;
  BoundingBox box;
};

struct Track {
  int id = 0;
  KalmanBoxFilter filter;
  int age = 0;  // predict steps since creation
  int time_since_update = 0;
  int hit_streak = 0;
  int hits = 0;
  std::deque<HistoryEntry> history;  // observed boxes, oldest first
  BoundingBox last_box;              // most recent observed box
  BoundingBox predicted;             // box predicted for the current step

  Track(int id_, const BoundingBox& box, std::int64_t frame, const KalmanNoise& noise)
      : id(id_), filter(box, noise), last_box(box), predicted(box) {
    history.push_back({frame, box});
  }
};

/// Advances the track one step and returns the predicted box.
inline BoundingBox predict(Track& t) {
  t.filter.predict();
  ++t.age;
  if (t.time_since_update > 0) t.hit_streak = 0;
  ++t.time_since_update;
  t.predicted = t.filter.box();
  return t.predicted;
}

struct TrackerParams {
  double iou_gate = 0.3;
  int max_age = 3;
  int min_hits = 1;
  std::size_t history_capacity = 16;
  KalmanNoise noise;
};

struct StepResult {
  struct Match {
    int track_id;
    BoundingBox box;
  };
  std::vector<Match> matched;
  std::vector<int> new_ids;
  std::vector<int> dead_ids;
};

/// Single-writer multi-object tracker.
class Tracker {
 public:
  explicit Tracker(TrackerParams params = {}) : params_(params) {}

  StepResult step(const std::vector<BoundingBox>& detections, std::int64_t frame_index) {
    StepResult out;
    ++frame_count_;
    for (Track& t : tracks_) predict(t);

    const int nt = static_cast<int>(tracks_.size());
    const int nd = static_cast<int>(detections.size());
    std::vector<int> det_to_track(static_cast<std::size_t>(nd), -1);
    if (nt > 0 && nd > 0) {
      std::vector<double> cost(static_cast<std::size_t>(nt) * nd);
      std::vector<double> overlap(cost.size());
      for (int i = 0; i < nt; ++i) {
        for (int j = 0; j < nd; ++j) {
          const double o = iou(tracks_[static_cast<std::size_t>(i)].predicted, detections[static_cast<std::size_t>(j)]);
          overlap[static_cast<std::size_t>(i) * nd + j] = o;
          cost[static_cast<std::size_t>(i) * nd + j] = 1.0 - o;
        }
      }
      const auto assign = hungarian(cost, nt, nd);
      for (int i = 0; i < nt; ++i) {
        const int j = assign[static_cast<std::size_t>(i)];
        if (j >= 0 && overlap[static_cast<std::size_t>(i) * nd + j] >= params_.iou_gate) {
          det_to_track[static_cast<std::size_t>(j)] = i;
        }
      }
    }

    for (int j = 0; j < nd; ++j) {
      const int i = det_to_track[static_cast<std::size_t>(j)];
      if (i < 0) continue;
      Track& t = tracks_[static_cast<std::size_t>(i)];
      const BoundingBox& box = detections[static_cast<std::size_t>(j)];
      t.filter.update(box);
      t.time_since_update = 0;
      ++t.hits;
      ++t.hit_streak;
      t.last_box = box;
      if (t.history.empty() || t.history.back().frame_index < frame_index) {
        t.history.push_back({frame_index, box});
        while (t.history.size() > params_.history_capacity) t.history.pop_front();
      }
      out.matched.push_back({t.id, box});
    }
    for (int j = 0; j < nd; ++j) {
      if (det_to_track[static_cast<std::size_t>(j)] >= 0) continue;
      tracks_.emplace_back(next_id_, detections[static_cast<std::size_t>(j)], frame_index, params_.noise);
      tracks_.back().hits = 1;
      tracks_.back().hit_streak = 1;
      out.new_ids.push_back(next_id_);
      ++next_id_;
    }

    std::erase_if(tracks_, [&](const Track& t) {
      if (t.time_since_update > params_.max_age) {
        out.dead_ids.push_back(t.id);
        return true;
      }
      return false;
    });
    return out;
  }

  const std::vector<Track>& tracks() const { return tracks_; }
  const Track* find(int id) const {
    for (const Track& t : tracks_) {
      if (t.id == id) return &t;
    }
    return nullptr;
  }
  const TrackerParams& params() const { return params_; }

  /// Tracks observed in the latest step with enough hits to be reported.
  std::vector<const Track*> confirmed() const {
    std::vector<const Track*> v;
    for (const Track& t : tracks_) {
      if (t.time_since_update == 0 && (t.hit_streak >= params_.min_hits || frame_count_ <= params_.min_hits)) {
        v.push_back(&t);
      }
    }
    return v;
  }

 private:
  TrackerParams params_;
  std::vector<Track> tracks_;
  int next_id_ = 1;
  std::int64_t frame_count_ = 0;
};

}  // namespace mgd
