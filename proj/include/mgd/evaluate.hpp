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

// Detection metrics at a single IoU threshold, and wall-clock throughput.

#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "mgd/error.hpp"
#include "mgd/io.hpp"
#include "mgd/track.hpp"

namespace mgd {

struct EvalOptions {
  double iou_threshold = 0.25;  // a match needs IoU strictly above this
  std::int64_t first_frame = std::numeric_limits<std::int64_t>::min();
  std::int64_t last_frame = std::numeric_limits<std::int64_t>::max();
};

struct EvalResult {
  double precision = 1.0;
  double recall = 0.0;
  double f1 = 0.0;
  double ap = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
};

/// Order in which detections claim ground truth: confidence descending, then
/// lower x, then lower y.
inline std::vector<std::size_t> claim_order(const std::vector<Detection>& dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const Detection& p = dets[a];
    const Detection& q = dets[b];
    if (p.confidence != q.confidence) return p.confidence > q.confidence;
    if (p.box.x != q.box.x) return p.box.x < q.box.x;
    return p.box.y < q.box.y;
  });
  return order;
}

/// Greedy matching within one frame. Returns a true-positive flag per detection.
inline std::vector<bool> match_frame(const std::vector<Detection>& dets, const std::vector<GtObject>& gt,
                                     double iou_threshold) {
  std::vector<bool> tp(dets.size(), false);
  std::vector<bool> taken(gt.size(), false);
  for (std::size_t i : claim_order(dets)) {
    double best = iou_threshold;
    std::size_t best_j = gt.size();
    for (std::size_t j = 0; j < gt.size(); ++j) {
      if (taken[j]) continue;
      const double o = iou(dets[i].box, gt[j].box);
      if (o > best) {
        best = o;
        best_j = j;
      }
    }
    if (best_j < gt.size()) {
      taken[best_j] = true;
      tp[i] = true;
    }
  }
  return tp;
}

/// Precision, recall and F1 over the whole detection set; AP as the area
/// under the all-point interpolated precision/recall curve swept over
/// confidence. With no detections precision is 1; with no true positives
/// recall and F1 are 0.
inline EvalResult evaluate(const DetectionSet& dets, const GroundTruth& gt, const EvalOptions& opt = {}) {
  if (!(opt.iou_threshold > 0.0 && opt.iou_threshold < 1.0)) {
    throw InvalidInput("evaluate: IoU threshold must be in (0,1)");
  }
  struct Scored {
    double confidence;
    std::int64_t frame;
    double x;
    bool tp;
  };
  std::vector<Scored> scored;
  std::size_t total_gt = 0;
  auto in_range = [&](std::int64_t f) { return f >= opt.first_frame && f <= opt.last_frame; };

  for (const auto& [frame, objs] : gt) {
    if (in_range(frame)) total_gt += objs.size();
  }
  static const std::vector<GtObject> kNoGt;
  for (const auto& [frame, list] : dets) {
    if (!in_range(frame)) continue;
    const auto it = gt.find(frame);
    const auto flags = match_frame(list, it == gt.end() ? kNoGt : it->second, opt.iou_threshold);
    for (std::size_t i = 0; i < list.size(); ++i) {
      scored.push_back({list[i].confidence, frame, list[i].box.x, flags[i]});
    }
  }

  EvalResult r;
  r.tp = static_cast<std::size_t>(std::count_if(scored.begin(), scored.end(), [](const Scored& s) { return s.tp; }));
  r.fp = scored.size() - r.tp;
  r.fn = total_gt - r.tp;
  r.precision = scored.empty() ? 1.0 : static_cast<double>(r.tp) / static_cast<double>(scored.size());
  r.recall = total_gt == 0 ? 0.0 : static_cast<double>(r.tp) / static_cast<double>(total_gt);
  r.f1 = r.tp == 0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);

  if (total_gt == 0 || scored.empty()) return r;
  std::stable_sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.x < b.x;
  });
  std::vector<double> prec(scored.size());
  std::vector<double> rec(scored.size());
  std::size_t cum_tp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    cum_tp += scored[i].tp ? 1 : 0;
    prec[i] = static_cast<double>(cum_tp) / static_cast<double>(i + 1);
    rec[i] = static_cast<double>(cum_tp) / static_cast<double>(total_gt);
  }
  // Precision envelope from the right, then integrate over recall steps.
  for (std::size_t i = scored.size() - 1; i > 0; --i) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double ap = 0.0;
  double prev_recall = 0.0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    if (rec[i] > prev_recall) {
      ap += (rec[i] - prev_recall) * prec[i];
      prev_recall = rec[i];
    }
  }
  r.ap = ap;
  return r;
}

/// Frames per second of `process` over `frames`, timed end to end.
template <class Fn>
double measure_fps(Fn&& process, std::span<const Frame> frames) {
  if (frames.size() < 30) throw InvalidInput("measure_fps: need at least 30 frames");
  const auto start = std::chrono::steady_clock::now();
  for (const Frame& f : frames) process(f);
  const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return elapsed > 0.0 ? static_cast<double>(frames.size()) / elapsed : std::numeric_limits<double>::infinity();
}

}  // namespace mgd
