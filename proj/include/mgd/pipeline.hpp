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

// Streaming detector: motion enhancement -> tracking -> trajectory filter ->
// crop classifier -> windowed detector. A frame t is processed once t + k has
// arrived, so results trail the newest input by k frames.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <deque>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "mgd/align.hpp"
#include "mgd/appearance.hpp"
#include "mgd/error.hpp"
#include "mgd/external_backend.hpp"
#include "mgd/imgproc.hpp"
#include "mgd/mfe.hpp"
#include "mgd/track.hpp"
#include "mgd/trajfilter.hpp"

namespace mgd {

struct PipelineConfig {
  int k = 1;
  int diff_threshold = 5;
  FusionMode fusion = FusionMode::kThreeFrameOr;
  int morph_iterations = 1;
  int min_blob_area = 15;

  int grid_cols = 30;
  int grid_rows = 20;
  int lk_levels = 3;
  int lk_window = 21;
  int lk_iterations = 30;
  double lk_epsilon = 0.01;
  double ransac_threshold = 3.0;
  double ransac_confidence = 0.995;
  int ransac_max_iterations = 2000;
  std::uint64_t seed = 0;

  double iou_gate = 0.3;
  int max_age = 3;
  int min_hits = 1;

  double tau_D = 0.5;
  MetricMode metric_mode = MetricMode::kSelfDiag;  // see README, trajectory filter

  double lac_threshold = 0.5;
  int lad_crop = 320;
  double lad_conf = 0.5;
  double lad_merge_iou = 0.5;

  bool enable_tf = true;
  bool enable_lac = true;
  bool enable_lad = true;
  std::string lac_backend = "passthrough";
  std::string lad_backend = "centroid";

  /// Throws InvalidInput when a value is outside its documented range.
  void validate() const {
    auto require = [](bool ok, const char* what) {
      if (!ok) throw InvalidInput(std::string("PipelineConfig: ") + what);
    };
    require(k >= 1, "k must be >= 1");
    require(diff_threshold >= 0 && diff_threshold <= 255, "diff_threshold must be in [0,255]");
    require(morph_iterations >= 1, "morph_iterations must be >= 1");
    require(min_blob_area >= 1, "min_blob_area must be >= 1");
    require(grid_cols >= 2 && grid_rows >= 2, "grid_cols and grid_rows must be >= 2");
    require(lk_levels >= 0 && lk_levels <= 8, "lk_levels must be in [0,8]");
    require(lk_window >= 3 && lk_window % 2 == 1, "lk_window must be odd and >= 3");
    require(lk_iterations >= 1, "lk_iterations must be >= 1");
    require(lk_epsilon > 0, "lk_epsilon must be positive");
    require(ransac_threshold > 0, "ransac_threshold must be positive");
    require(ransac_confidence > 0 && ransac_confidence < 1, "ransac_confidence must be in (0,1)");
    require(ransac_max_iterations >= 1, "ransac_max_iterations must be >= 1");
    require(iou_gate >= 0 && iou_gate <= 1, "iou_gate must be in [0,1]");
    require(max_age >= 0, "max_age must be >= 0");
    require(min_hits >= 0, "min_hits must be >= 0");
    require(tau_D >= 0, "tau_D must be >= 0");
    require(lac_threshold >= 0 && lac_threshold <= 1, "lac_threshold must be in [0,1]");
    require(lad_crop >= 1, "lad_crop must be >= 1");
    require(lad_conf >= 0 && lad_conf <= 1, "lad_conf must be in [0,1]");
    require(lad_merge_iou >= 0 && lad_merge_iou <= 1, "lad_merge_iou must be in [0,1]");
  }

  MfeConfig mfe() const { return {diff_threshold, fusion, morph_iterations, min_blob_area}; }

  AlignParams align() const {
    AlignParams p;
    p.grid_cols = grid_cols;
    p.grid_rows = grid_rows;
    p.lk.levels = lk_levels;
    p.lk.window = lk_window;
    p.lk.max_iterations = lk_iterations;
    p.lk.epsilon = lk_epsilon;
    p.ransac.reprojection_threshold = ransac_threshold;
    p.ransac.confidence = ransac_confidence;
    p.ransac.max_iterations = ransac_max_iterations;
    return p;
  }

  TrackerParams tracker() const {
    TrackerParams p;
    p.iou_gate = iou_gate;
    p.max_age = max_age;
    p.min_hits = min_hits;
    return p;
  }

  TrajectoryParams trajectory() const {
    TrajectoryParams p;
    p.tau = tau_D;
    p.mode = metric_mode;
    return p;
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
bool parse_value(const std::string& v, T& out) {
  if constexpr (std::is_same_v<T, bool>) {
    if (v == "true" || v == "1") { out = true; return true; }
    if (v == "false" || v == "0") { out = false; return true; }
    return false;
  } else if constexpr (std::is_same_v<T, std::string>) {
    out = v;
    return !v.empty();
  } else {
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    return ec == std::errc() && ptr == v.data() + v.size();
  }
}

}  // namespace detail

/// Applies `key = value` lines onto `cfg`. '#' starts a comment. Unknown keys,
/// duplicate keys and unparsable values raise ParseError naming `source` and
/// the line. Range checks run afterwards through validate().
inline void apply_config_text(PipelineConfig& cfg, std::istream& in, const std::string& source = "<config>") {
  using Setter = std::function<bool(const std::string&)>;
  auto field = [](auto& member) -> Setter {
    return [&member](const std::string& v) { return detail::parse_value(v, member); };
  };
  std::map<std::string, Setter, std::less<>> setters = {
      {"k", field(cfg.k)},
      {"diff_threshold", field(cfg.diff_threshold)},
      {"fusion",
       [&cfg](const std::string& v) {
         auto m = parse_fusion_mode(v);
         if (m) cfg.fusion = *m;
         return m.has_value();
       }},
      {"morph_iterations", field(cfg.morph_iterations)},
      {"min_blob_area", field(cfg.min_blob_area)},
      {"grid_cols", field(cfg.grid_cols)},
      {"grid_rows", field(cfg.grid_rows)},
      {"lk_levels", field(cfg.lk_levels)},
      {"lk_window", field(cfg.lk_window)},
      {"lk_iterations", field(cfg.lk_iterations)},
      {"lk_epsilon", field(cfg.lk_epsilon)},
      {"ransac_threshold", field(cfg.ransac_threshold)},
      {"ransac_confidence", field(cfg.ransac_confidence)},
      {"ransac_max_iterations", field(cfg.ransac_max_iterations)},
      {"seed", field(cfg.seed)},
      {"iou_gate", field(cfg.iou_gate)},
      {"max_age", field(cfg.max_age)},
      {"min_hits", field(cfg.min_hits)},
      {"tau_D", field(cfg.tau_D)},
      {"metric_mode",
       [&cfg](const std::string& v) {
         auto m = parse_metric_mode(v);
         if (m) cfg.metric_mode = *m;
         return m.has_value();
       }},
      {"lac_threshold", field(cfg.lac_threshold)},
      {"lad_crop", field(cfg.lad_crop)},
      {"lad_conf", field(cfg.lad_conf)},
      {"lad_merge_iou", field(cfg.lad_merge_iou)},
      {"enable_tf", field(cfg.enable_tf)},
      {"enable_lac", field(cfg.enable_lac)},
      {"enable_lad", field(cfg.enable_lad)},
      {"lac_backend", field(cfg.lac_backend)},
      {"lad_backend", field(cfg.lad_backend)},
  };
  std::map<std::string, std::size_t> seen;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (detail::trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end()) throw ParseError(source, line_no, "unknown key '" + key + "'");
    if (const auto prev = seen.find(key); prev != seen.end()) {
      throw ParseError(source, line_no, "duplicate key '" + key + "' (first on line " + std::to_string(prev->second) + ")");
    }
    seen.emplace(key, line_no);
    if (!it->second(value)) throw ParseError(source, line_no, "invalid value '" + value + "' for key '" + key + "'");
  }
}

inline PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path, 0, "cannot open config file");
  PipelineConfig cfg;
  apply_config_text(cfg, in, path);
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(path, 0, e.what());
  }
  return cfg;
}

inline PipelineConfig parse_config(const std::string& text) {
  std::istringstream in(text);
  PipelineConfig cfg;
  apply_config_text(cfg, in);
  cfg.validate();
  return cfg;
}

struct Diagnostics {
  std::size_t candidates = 0;
  std::size_t tracks_alive = 0;
  std::size_t tf_suppressed = 0;
  std::size_t lac_rejected = 0;
  std::size_t lad_rejected = 0;
  std::size_t backend_errors = 0;
  bool alignment_degraded = false;
  bool fusion_degraded = false;
};

struct FrameResult {
  std::int64_t frame_index = 0;
  std::vector<Detection> detections;
  std::vector<int> source_tracks;       // id of the track behind each detection
  std::vector<BoundingBox> candidates;  // motion boxes from enhancement
  Diagnostics diagnostics;
};

class Pipeline {
 public:
  /// Backends default to the ones named in the config. Pass explicit ones to
  /// share or stub them.
  explicit Pipeline(PipelineConfig cfg, std::unique_ptr<Classifier> classifier = nullptr,
                    std::unique_ptr<Detector> detector = nullptr)
      : cfg_(std::move(cfg)),
        tracker_(cfg_.tracker()),
        homographies_(64, 1),
        classifier_(std::move(classifier)),
        detector_(std::move(detector)) {
    cfg_.validate();
    if (cfg_.enable_lac && !classifier_) classifier_ = make_classifier(cfg_.lac_backend);
    if (cfg_.enable_lad && !detector_) detector_ = make_detector(cfg_.lad_backend);
  }

  const PipelineConfig& config() const { return cfg_; }
  const Tracker& tracker() const { return tracker_; }

  /// Buffers `f`; returns the result for frame f.index() - k once available.
  std::optional<FrameResult> push_frame(Frame f) {
    if (finished_) throw InvalidInput("push_frame: stream already flushed");
    if (!buffer_.empty()) {
      if (f.index() != buffer_.back().frame.index() + 1) {
        throw InvalidInput("push_frame: frames must arrive in contiguous increasing index order");
      }
      if (!f.same_size(buffer_.back().frame)) throw InvalidInput("push_frame: frame size changed");
    } else {
      first_index_ = f.index();
      next_to_process_ = f.index() + cfg_.k;
    }
    Buffered b{std::move(f), nullptr};
    b.pyramid = std::make_shared<ImagePyramid>(b.frame, cfg_.lk_levels);
    buffer_.push_back(std::move(b));

    const std::int64_t newest = buffer_.back().frame.index();
    if (newest - cfg_.k < next_to_process_) return std::nullopt;
    FrameResult r = process(next_to_process_, /*tail=*/false);
    ++next_to_process_;
    trim_buffer();
    return r;
  }

  /// Emits the frames still waiting for their t + k partner, using the
  /// previous pair only. Ends the stream.
  std::vector<FrameResult> flush() {
    std::vector<FrameResult> out;
    if (finished_ || buffer_.empty()) {
      finished_ = true;
      return out;
    }
    const std::int64_t newest = buffer_.back().frame.index();
    for (; next_to_process_ <= newest; ++next_to_process_) {
      out.push_back(process(next_to_process_, /*tail=*/true));
    }
    finished_ = true;
    buffer_.clear();
    aligned_.clear();
    return out;
  }

 private:
  struct Buffered {
    Frame frame;
    std::shared_ptr<ImagePyramid> pyramid;
  };

  const Buffered& buffered(std::int64_t index) const {
    return buffer_[static_cast<std::size_t>(index - buffer_.front().frame.index())];
  }

  void trim_buffer() {
    // Keep frames from (next t) - k onwards.
    while (!buffer_.empty() && buffer_.front().frame.index() < next_to_process_ - cfg_.k) buffer_.pop_front();
    if (!buffer_.empty()) std::erase_if(aligned_, [&](const auto& e) { return e.first.first < buffer_.front().frame.index(); });
  }

  // Homography taking frame `from` onto frame `to`. Each unordered pair is
  // estimated once, forward in time; the reverse direction is its inverse.
  std::optional<Homography> align(std::int64_t from, std::int64_t to) {
    if (from > to) {
      const auto h = align(to, from);
      if (!h) return std::nullopt;
      try {
        return invert(*h);
      } catch (const InvalidInput&) {
        return std::nullopt;
      }
    }
    const auto key = std::make_pair(from, to);
    if (const auto it = aligned_.find(key); it != aligned_.end()) return it->second;
    std::mt19937_64 rng(cfg_.seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(from)) ^
                        (0xC2B2AE3D27D4EB4Full * static_cast<std::uint64_t>(to - from)));
    std::optional<Homography> h;
    try {
      h = estimate_alignment(*buffered(from).pyramid, *buffered(to).pyramid, rng, cfg_.align()).h;
    } catch (const EstimationFailure&) {
    } catch (const InvalidInput&) {
    }
    aligned_.emplace(key, h);
    return h;
  }

  FrameResult process(std::int64_t t, bool tail) {
    FrameResult r;
    r.frame_index = t;
    const std::int64_t k = cfg_.k;
    const Frame& cur = buffered(t).frame;
    const bool three = cfg_.fusion != FusionMode::kTwoFrame && !tail;
    r.diagnostics.fusion_degraded = tail && cfg_.fusion != FusionMode::kTwoFrame;

    const auto h_prev = align(t - k, t);
    std::optional<Homography> h_next;
    if (three) h_next = align(t + k, t);
    const bool degraded = !h_prev || (three && !h_next);
    r.diagnostics.alignment_degraded = degraded;

    MotionCandidates mc;
    if (!degraded) {
      const MfeConfig mfe_cfg = cfg_.mfe();
      mc = three ? enhance(buffered(t - k).frame, cur, buffered(t + k).frame, *h_prev, *h_next, mfe_cfg)
                 : enhance_two_frame(buffered(t - k).frame, cur, *h_prev, mfe_cfg);
    }
    r.candidates = mc.boxes;
    r.diagnostics.candidates = mc.boxes.size();

    tracker_.step(mc.boxes, t);
    r.diagnostics.tracks_alive = tracker_.tracks().size();

    // Unit-stride homography history for trajectory alignment.
    if (cfg_.enable_tf) {
      std::optional<Homography> h1 = k == 1 ? h_prev : align(t - 1, t);
      if (h1) {
        homographies_.push(t, *h1);
      } else {
        homographies_.mark_missing(t);
      }
    }

    std::vector<Sourced> refined;
    for (const Track* track : tracker_.confirmed()) {
      const BoundingBox box = track->last_box;
      if (cfg_.enable_tf && classify(*track, homographies_, cfg_.trajectory()).probability == 0) {
        ++r.diagnostics.tf_suppressed;
        continue;
      }
      if (cfg_.enable_lac) {
        double score = 0.0;
        try {
          score = classify_crop(*classifier_, resize_bilinear(crop(cur, clip_to(box, cur)), kClassifierSide, kClassifierSide));
        } catch (const BackendError&) {
          ++r.diagnostics.backend_errors;
          ++r.diagnostics.lac_rejected;
          continue;
        }
        if (score < cfg_.lac_threshold) {
          ++r.diagnostics.lac_rejected;
          continue;
        }
      }
      if (cfg_.enable_lad) {
        std::vector<Detection> found;
        try {
          const ClampedCrop window = crop_clamped(cur, box.center(), cfg_.lad_crop);
          found = detect_crop(*detector_, window.crop, window.offset, cfg_.lad_conf);
        } catch (const BackendError&) {
          ++r.diagnostics.backend_errors;
        }
        if (found.empty()) {
          ++r.diagnostics.lad_rejected;
          continue;
        }
        for (const Detection& d : found) refined.push_back({d, track->id});
      } else {
        r.detections.push_back({box, 1.0, cfg_.enable_lac ? Stage::kClassified : Stage::kMotion});
        r.source_tracks.push_back(track->id);
      }
    }
    if (cfg_.enable_lad) {
      for (const Sourced& s : merge_overlapping(std::move(refined), cfg_.lad_merge_iou)) {
        r.detections.push_back(s.det);
        r.source_tracks.push_back(s.track);
      }
    }
    return r;
  }

  static BoundingBox clip_to(const BoundingBox& b, const Frame& f) {
    const double x0 = std::clamp(std::floor(b.x), 0.0, f.width() - 1.0);
    const double y0 = std::clamp(std::floor(b.y), 0.0, f.height() - 1.0);
    const double x1 = std::clamp(std::ceil(b.right()), x0 + 1.0, static_cast<double>(f.width()));
    const double y1 = std::clamp(std::ceil(b.bottom()), y0 + 1.0, static_cast<double>(f.height()));
    return {x0, y0, x1 - x0, y1 - y0};
  }

  struct Sourced {
    Detection det;
    int track;
  };

  /// Greedy suppression: highest confidence first, drop anything overlapping
  /// a kept detection with IoU above `threshold`.
  static std::vector<Sourced> merge_overlapping(std::vector<Sourced> dets, double threshold) {
    std::stable_sort(dets.begin(), dets.end(), [](const Sourced& a, const Sourced& b) {
      if (a.det.confidence != b.det.confidence) return a.det.confidence > b.det.confidence;
      if (a.det.box.y != b.det.box.y) return a.det.box.y < b.det.box.y;
      return a.det.box.x < b.det.box.x;
    });
    std::vector<Sourced> kept;
    for (const Sourced& d : dets) {
      const bool dup = std::any_of(kept.begin(), kept.end(), [&](const Sourced& k) {
        return iou(k.det.box, d.det.box) > threshold || k.det.box == d.det.box;
      });
      if (!dup) kept.push_back(d);
    }
    return kept;
  }

  PipelineConfig cfg_;
  Tracker tracker_;
  HomographyBuffer homographies_;
  std::map<std::pair<std::int64_t, std::int64_t>, std::optional<Homography>> aligned_;
  std::unique_ptr<Classifier> classifier_;
  std::unique_ptr<Detector> detector_;
  std::deque<Buffered> buffer_;
  std::int64_t first_index_ = 0;
  std::int64_t next_to_process_ = 0;
  bool finished_ = false;
};

}  // namespace mgd
