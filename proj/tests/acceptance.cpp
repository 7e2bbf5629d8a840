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


// Runs each acceptance criterion once and prints one PASS/FAIL line per
// criterion. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mgd/mgd.hpp"

namespace {

using namespace mgd;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. Hungarian vs exhaustive search.

// Sum of the chosen cells in row order, so both sides round identically.
double row_order_total(const std::vector<double>& cost, int rows, int cols, const std::vector<int>& row_to_col) {
  double t = 0;
  for (int r = 0; r < rows; ++r) {
    const int c = row_to_col[static_cast<std::size_t>(r)];
    if (c >= 0) t += cost[static_cast<std::size_t>(r) * cols + c];
  }
  return t;
}

double brute_force_total(const std::vector<double>& cost, int rows, int cols) {
  const bool by_rows = rows <= cols;
  const int n_small = by_rows ? rows : cols;
  std::vector<int> perm(static_cast<std::size_t>(by_rows ? cols : rows));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> row_to_col(static_cast<std::size_t>(rows));
  do {
    std::fill(row_to_col.begin(), row_to_col.end(), -1);
    for (int i = 0; i < n_small; ++i) {
      const int p = perm[static_cast<std::size_t>(i)];
      if (by_rows) {
        row_to_col[static_cast<std::size_t>(i)] = p;
      } else {
        row_to_col[static_cast<std::size_t>(p)] = i;
      }
    }
    best = std::min(best, row_order_total(cost, rows, cols, row_to_col));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Outcome hungarian_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dim(1, 6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  int exact = 0;
  constexpr int kTrials = 1000;
  for (int trial = 0; trial < kTrials; ++trial) {
    const int rows = dim(rng);
    const int cols = dim(rng);
    std::vector<double> cost(static_cast<std::size_t>(rows) * cols);
    for (double& v : cost) v = u(rng);
    const auto a = hungarian(cost, rows, cols);
    if (row_order_total(cost, rows, cols, a) == brute_force_total(cost, rows, cols)) ++exact;
  }
  const double s = seconds_since(t0);
  return {exact == kTrials && s < 10.0, fmt("%d/%d exact, %.2f s", exact, kTrials, s)};
}

// 2. AP fixtures.

Outcome ap_fixtures() {
  const GroundTruth gt = {{0, {{1, {0, 0, 10, 10}}}}};
  auto d = [](double x, double y, double w, double h, double c) { return Detection{{x, y, w, h}, c, Stage::kRefined}; };
  const double single = evaluate({{0, {d(0, 0, 10, 5, 0.9)}}}, gt).ap;
  const double ranked = evaluate({{0, {d(50, 50, 10, 10, 0.9), d(0, 0, 10, 10, 0.8)}}}, gt).ap;
  const double boundary = evaluate({{0, {d(6, 0, 10, 10, 0.9)}}}, gt).ap;
  return {single == 1.0 && ranked == 0.5 && boundary == 0.0,
          fmt("AP %.17g / %.17g / %.17g (want 1 / 0.5 / 0)", single, ranked, boundary)};
}

// 3. Homography recovery under outliers and noise.

Outcome homography_recovery() {
  const auto t0 = Clock::now();
  int good = 0;
  double worst = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(-2.0, 2.0), shift(-15.0, 15.0), persp(-2e-5, 2e-5);
    const Homography rigid = Homography::rigid(angle(rng), {320, 240}, shift(rng), shift(rng));
    Eigen::Matrix3d p = Eigen::Matrix3d::Identity();
    p(2, 0) = persp(rng);
    p(2, 1) = persp(rng);
    const Homography truth = compose(Homography(p), rigid);

    std::normal_distribution<double> noise(0.0, 0.5);
    std::uniform_real_distribution<double> ux(0.0, 640.0), uy(0.0, 480.0), u01(0.0, 1.0);
    std::vector<PointMatch> matches;
    std::vector<bool> inlier;
    for (const Point2& s : sample_grid(640, 480, 30, 20)) {
      const bool outlier = u01(rng) < 0.2;
      Point2 q = truth.apply(s);
      if (outlier) {
        q = {ux(rng), uy(rng)};
      } else {
        q.x += noise(rng);
        q.y += noise(rng);
      }
      matches.push_back({s, q, true});
      inlier.push_back(!outlier);
    }
    try {
      const HomographyEstimate est = estimate_homography(std::span<const PointMatch>(matches), rng);
      double err = 0;
      int n = 0;
      for (std::size_t i = 0; i < matches.size(); ++i) {
        if (!inlier[i]) continue;
        const Point2 q = est.h.apply(matches[i].src);
        err += std::hypot(q.x - matches[i].dst.x, q.y - matches[i].dst.y);
        ++n;
      }
      err /= n;
      worst = std::max(worst, err);
      if (err < 1.0) ++good;
    } catch (const EstimationFailure&) {
      worst = std::numeric_limits<double>::infinity();
    }
  }
  const double s = seconds_since(t0);
  return {good >= 95 && s < 30.0, fmt("%d/100 trials < 1 px (worst %.3f px), %.2f s", good, worst, s)};
}

// 4. Distance metric bounds.

Outcome metric_bounds() {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> pos(-1000.0, 1000.0), ext(1e-3, 500.0);
  int in_range = 0;
  for (int i = 0; i < 10000; ++i) {
    const BoundingBox a{pos(rng), pos(rng), ext(rng), ext(rng)};
    const BoundingBox b{pos(rng), pos(rng), ext(rng), ext(rng)};
    const double d = distance_metric(a, b);
    if (d >= 0.0 && d < 1.0) ++in_range;
  }
  const double hand = distance_metric({0, 0, 10, 10}, {20, 0, 10, 10});
  return {in_range == 10000 && std::abs(hand - 0.63246) <= 1e-5,
          fmt("%d/10000 in [0,1), fixed pair %.6f", in_range, hand)};
}

// 5. OR vs AND on motion present in one frame pair only.

Frame square_scene(std::int64_t index, int sx) {
  Frame f(96, 64, index);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 96; ++x) f.at(x, y) = detail::clamp_px(128.0 + 40.0 * detail::texture(x, y, 10.0, 7));
  }
  for (int y = 28; y < 36; ++y) {
    for (int x = sx; x < sx + 8; ++x) f.at(x, y) = 250;
  }
  return f;
}

Outcome or_vs_and() {
  const Frame prev = square_scene(0, 20);
  const Frame cur = square_scene(1, 24);
  const Frame next = square_scene(2, 24);
  const Homography id = Homography::identity();
  MfeConfig cfg;
  cfg.fusion = FusionMode::kThreeFrameOr;
  const std::size_t n_or = enhance(prev, cur, next, id, id, cfg).boxes.size();
  cfg.fusion = FusionMode::kThreeFrameAnd;
  const std::size_t n_and = enhance(prev, cur, next, id, id, cfg).boxes.size();
  return {n_or >= 1 && n_and == 0, fmt("OR %zu candidates, AND %zu", n_or, n_and)};
}

// 6. End to end on the moving-camera clip.

SynthConfig criterion_clip() {
  SynthConfig sc;
  sc.width = 640;
  sc.height = 480;
  sc.length = 300;
  sc.camera.tx = 2.0;
  sc.camera.rotation = 0.2;
  sc.targets = {{8, 3.0, PathType::kLinear, -90}, {8, 3.0, PathType::kLinear, 90}};
  for (int i = 0; i < 3; ++i) sc.distractors.push_back({12, 1.0, DistractorKind::kParallaxSprite, 120, 8.0});
  return sc;
}

bool overlaps_any(const BoundingBox& b, const std::vector<GtObject>& objs) {
  return std::any_of(objs.begin(), objs.end(), [&](const GtObject& g) { return iou(b, g.box) > 0; });
}

struct RunStats {
  EvalResult eval;
  std::size_t distractor_fp = 0;
};

// False positives whose source track sits on a distractor and on no target.
RunStats run_clip(const SynthClip& clip, PipelineConfig cfg) {
  constexpr std::int64_t kWarmup = 10;
  Pipeline p(std::move(cfg));
  DetectionSet dets;
  RunStats st;
  auto tally = [&](const FrameResult& r) {
    dets[r.frame_index] = r.detections;
    if (r.frame_index < kWarmup) return;
    const auto& truth = clip.truth.at(r.frame_index);
    const auto matched = match_frame(r.detections, truth, 0.25);
    for (std::size_t i = 0; i < matched.size(); ++i) {
      if (matched[i]) continue;
      const Track* t = p.tracker().find(r.source_tracks[i]);
      if (t && overlaps_any(t->last_box, clip.distractor_truth.at(r.frame_index)) && !overlaps_any(t->last_box, truth)) {
        ++st.distractor_fp;
      }
    }
  };
  for (const Frame& f : clip.frames) {
    if (auto r = p.push_frame(f)) tally(*r);
  }
  for (const FrameResult& r : p.flush()) tally(r);
  EvalOptions eo;
  eo.first_frame = kWarmup;
  eo.iou_threshold = 0.25;
  st.eval = evaluate(dets, clip.truth, eo);
  return st;
}

Outcome end_to_end(const SynthClip& clip) {
  const auto t0 = Clock::now();
  PipelineConfig on;
  const RunStats with_tf = run_clip(clip, on);
  const double s = seconds_since(t0);
  PipelineConfig off;
  off.enable_tf = false;
  const RunStats without_tf = run_clip(clip, off);
  const double reduction =
      without_tf.distractor_fp == 0
          ? 0.0
          : 1.0 - static_cast<double>(with_tf.distractor_fp) / static_cast<double>(without_tf.distractor_fp);
  const bool ok = with_tf.eval.recall >= 0.7 && reduction >= 0.5 && s < 120.0;
  return {ok, fmt("recall %.3f (P %.3f), distractor FP %zu -> %zu (%.0f%% fewer), %.1f s", with_tf.eval.recall,
                  with_tf.eval.precision, without_tf.distractor_fp, with_tf.distractor_fp, 100.0 * reduction, s)};
}

// 7. Output index is always input index minus k.

Outcome latency(const SynthClip& clip) {
  int violations = 0;
  int outputs = 0;
  std::string per_k;
  for (int k = 1; k <= 3; ++k) {
    PipelineConfig cfg;
    cfg.k = k;
    Pipeline p(cfg);
    std::int64_t expected_next = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      const Frame& f = clip.frames[i];
      const auto r = p.push_frame(f);
      if (f.index() < 2 * k) {
        if (r) ++violations;
        continue;
      }
      if (!r || r->frame_index != f.index() - k) {
        ++violations;
        continue;
      }
      ++outputs;
    }
    // The tail flushed at end of stream continues the sequence without gaps.
    for (const FrameResult& r : p.flush()) {
      if (r.frame_index < 40 - k) ++violations;
      ++outputs;
      expected_next = r.frame_index + 1;
    }
    if (expected_next != 40) ++violations;
    per_k += fmt(" k=%d", k);
  }
  return {violations == 0, fmt("%d outputs,%s, %d violations", outputs, per_k.c_str(), violations)};
}

// 8. Two runs write byte-identical detection files.

std::string detection_file(const SynthConfig& sc, std::uint64_t seed, const std::filesystem::path& path) {
  const SynthClip clip = synth_generate(sc, seed);
  Pipeline p(PipelineConfig{});
  DetectionSet dets;
  for (const Frame& f : clip.frames) {
    if (auto r = p.push_frame(f)) dets[r->frame_index] = r->detections;
  }
  for (const FrameResult& r : p.flush()) dets[r.frame_index] = r.detections;
  save_detections(path.string(), dets);
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  SynthConfig sc = criterion_clip();
  sc.length = 60;
  const auto dir = std::filesystem::temp_directory_path();
  const auto a = dir / "mgd_acceptance_a.csv";
  const auto b = dir / "mgd_acceptance_b.csv";
  const std::string first = detection_file(sc, 8, a);
  const std::string second = detection_file(sc, 8, b);
  std::filesystem::remove(a);
  std::filesystem::remove(b);
  const auto lines = std::count(first.begin(), first.end(), '\n');
  return {!first.empty() && first == second, fmt("%zu bytes, %ld detections, identical=%s", first.size(),
                                                 static_cast<long>(lines), first == second ? "yes" : "no")};
}

// 9. Throughput.

Outcome throughput(const SynthClip& vga) {
  SynthConfig hd;
  hd.width = 1920;
  hd.height = 1080;
  hd.length = 40;
  hd.camera.tx = 2.0;
  hd.camera.rotation = 0.2;
  hd.targets = {{8, 3.0, PathType::kLinear, -90}};
  const SynthClip clip = synth_generate(hd, 9);

  // Motion stage only: alignment, differencing, fusion, morphology and labeling.
  PipelineConfig motion;
  motion.enable_tf = motion.enable_lac = motion.enable_lad = false;
  Pipeline mp(motion);
  const double mfe_fps = measure_fps([&](const Frame& f) { mp.push_frame(f); }, std::span<const Frame>(clip.frames));

  Pipeline full(PipelineConfig{});
  const double full_fps = measure_fps([&](const Frame& f) { full.push_frame(f); }, std::span<const Frame>(vga.frames));
  return {mfe_fps >= 10.0 && full_fps >= 8.0,
          fmt("motion stage 1920x1080 %.1f FPS, full pipeline 640x480 %.1f FPS", mfe_fps, full_fps)};
}

// 10. Tracker lifecycle fixtures.

Outcome tracker_lifecycle() {
  int failed = 0;
  auto expect = [&](bool ok) { failed += ok ? 0 : 1; };
  {
    Tracker t;
    const StepResult r = t.step({{0, 0, 10, 10}, {50, 50, 10, 10}}, 0);
    expect(r.new_ids == std::vector<int>{1, 2} && r.matched.empty() && t.confirmed().size() == 2);
  }
  {
    Tracker t;
    t.step({{0, 0, 10, 10}}, 0);
    const StepResult r = t.step({{5.504, 0, 10, 10}}, 1);
    expect(r.matched.empty() && r.new_ids == std::vector<int>{2});
  }
  {
    Tracker t;
    t.step({{0, 0, 10, 10}}, 0);
    const StepResult r = t.step({{1, 0, 10, 10}}, 1);
    expect(r.matched.size() == 1 && r.matched[0].track_id == 1 && r.new_ids.empty());
  }
  {
    Tracker t;
    t.step({{0, 0, 10, 10}}, 0);
    for (int i = 1; i <= 3; ++i) expect(t.step({}, i).dead_ids.empty() && t.tracks().size() == 1);
    expect(t.step({}, 4).dead_ids == std::vector<int>{1} && t.tracks().empty());
  }
  return {failed == 0, fmt("%d fixture checks failed", failed)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& fn) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s C%d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "hungarian-oracle", hungarian_oracle);
  report(2, "ap-fixtures", ap_fixtures);
  report(3, "homography-recovery", homography_recovery);
  report(4, "distance-metric-bounds", metric_bounds);
  report(5, "or-vs-and-fusion", or_vs_and);
  const SynthClip clip = synth_generate(criterion_clip(), 1);
  report(6, "end-to-end-synthetic", [&] { return end_to_end(clip); });
  report(7, "streaming-latency", [&] { return latency(clip); });
  report(8, "determinism", determinism);
  report(9, "throughput", [&] { return throughput(clip); });
  report(10, "tracker-lifecycle", tracker_lifecycle);
  return failures == 0 ? 0 : 1;
}
