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

// Local appearance stages: a 32x32 crop classifier and a windowed detector,
// with built-in baselines and an external-process backend speaking the
// MGD/1 line protocol.

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mgd/error.hpp"
#include "mgd/imgproc.hpp"

namespace mgd {

inline constexpr int kClassifierSide = 32;

enum class Stage { kMotion, kClassified, kRefined };

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::kMotion: return "motion";
    case Stage::kClassified: return "classified";
    case Stage::kRefined: return "refined";
  }
  return "?";
}

inline std::optional<Stage> parse_stage(std::string_view s) {
  if (s == "motion") return Stage::kMotion;
  if (s == "classified") return Stage::kClassified;
  if (s == "refined") return Stage::kRefined;
  return std::nullopt;
}

struct Detection {
  BoundingBox box;
  double confidence = 1.0;
  Stage stage = Stage::kMotion;

  friend bool operator==(const Detection&, const Detection&) = default;
};

/// Scores a 32x32 crop with the probability that it shows a MAV.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual double score(const Frame& crop) = 0;
};

/// Finds objects in a crop. Boxes are in crop coordinates; confidences are
/// returned unfiltered.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::vector<Detection> detect(const Frame& crop) = 0;
};

inline double classify_crop(Classifier& backend, const Frame& crop) {
  if (crop.width() != kClassifierSide || crop.height() != kClassifierSide) {
    throw InvalidInput("classify_crop: crop must be 32x32");
  }
  const double s = backend.score(crop);
  if (!(s >= 0.0 && s <= 1.0)) {
    throw BackendError("classify_crop: score outside [0,1]");
  }
  return s;
}

/// Runs the detector on a window cut at `offset`, keeps detections with
/// confidence above `min_confidence`, clips them to the window and moves them
/// into full-image coordinates.
inline std::vector<Detection> detect_crop(Detector& backend, const Frame& crop, Point2 offset,
                                          double min_confidence = 0.5) {
  std::vector<Detection> out;
  for (Detection d : backend.detect(crop)) {
    if (!(d.confidence > min_confidence) || d.confidence > 1.0) continue;
    const double x0 = std::clamp(d.box.x, 0.0, static_cast<double>(crop.width()));
    const double y0 = std::clamp(d.box.y, 0.0, static_cast<double>(crop.height()));
    const double x1 = std::clamp(d.box.right(), 0.0, static_cast<double>(crop.width()));
    const double y1 = std::clamp(d.box.bottom(), 0.0, static_cast<double>(crop.height()));
    if (x1 - x0 <= 0.0 || y1 - y0 <= 0.0) continue;
    d.box = {x0 + offset.x, y0 + offset.y, x1 - x0, y1 - y0};
    d.stage = Stage::kRefined;
    out.push_back(d);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in classifiers

class PassthroughClassifier final : public Classifier {
 public:
  double score(const Frame&) override { return 1.0; }
};

inline constexpr std::size_t kHistogramBins = 16;
inline constexpr std::size_t kFeatureCount = kHistogramBins + 4;
using FeatureVector = std::array<double, kFeatureCount>;

/// 16-bin gradient-magnitude histogram (fractions of interior pixels, bin
/// width 12 intensity levels, last bin open-ended) followed by mean,
/// variance, min and max intensity.
inline FeatureVector extract_features(const Frame& crop) {
  FeatureVector f{};
  const int w = crop.width();
  const int h = crop.height();
  std::size_t interior = 0;
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      const double gx = 0.5 * (crop.at(x + 1, y) - crop.at(x - 1, y));
      const double gy = 0.5 * (crop.at(x, y + 1) - crop.at(x, y - 1));
      const auto bin = std::min<std::size_t>(kHistogramBins - 1, static_cast<std::size_t>(std::hypot(gx, gy) / 12.0));
      f[bin] += 1.0;
      ++interior;
    }
  }
  if (interior > 0) {
    for (std::size_t i = 0; i < kHistogramBins; ++i) f[i] /= static_cast<double>(interior);
  }
  std::int64_t sum = 0;
  std::int64_t sum_sq = 0;
  int lo = 255;
  int hi = 0;
  for (std::uint8_t v : crop.pixels()) {
    sum += v;
    sum_sq += static_cast<std::int64_t>(v) * v;
    lo = std::min<int>(lo, v);
    hi = std::max<int>(hi, v);
  }
  const auto n = static_cast<std::int64_t>(crop.pixels().size());
  f[kHistogramBins + 0] = static_cast<double>(sum) / static_cast<double>(n);
  f[kHistogramBins + 1] = static_cast<double>(n * sum_sq - sum * sum) / static_cast<double>(n * n);
  f[kHistogramBins + 2] = lo;
  f[kHistogramBins + 3] = hi;
  return f;
}

/// Logistic regression over the fixed feature vector. Intensity features are
/// rescaled to roughly unit range before the dot product.
class LinearClassifier final : public Classifier {
 public:
  static constexpr std::array<double, 4> kIntensityScale = {1.0 / 255.0, 1.0 / (127.5 * 127.5), 1.0 / 255.0,
                                                            1.0 / 255.0};

  LinearClassifier() { weights_.fill(0.0); }
  LinearClassifier(const FeatureVector& weights, double bias) : weights_(weights), bias_(bias) {}

  static FeatureVector scaled(const FeatureVector& raw) {
    FeatureVector s = raw;
    for (std::size_t i = 0; i < 4; ++i) s[kHistogramBins + i] *= kIntensityScale[i];
    return s;
  }

  double logit(const FeatureVector& raw) const {
    const FeatureVector s = scaled(raw);
    return std::inner_product(s.begin(), s.end(), weights_.begin(), bias_);
  }

  double score(const Frame& crop) override { return sigmoid(logit(extract_features(crop))); }

  const FeatureVector& weights() const { return weights_; }
  double bias() const { return bias_; }

  static double sigmoid(double z) {
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  }

  /// Model file: "MGDL1" then 21 little-endian doubles (20 weights, bias).
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInput("LinearClassifier::save: cannot open " + path);
    out.write("MGDL1", 5);
    for (double w : weights_) write_le(out, w);
    write_le(out, bias_);
    if (!out) throw InvalidInput("LinearClassifier::save: write failed for " + path);
  }

  static LinearClassifier load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open model file");
    char magic[5];
    in.read(magic, 5);
    if (!in || std::string_view(magic, 5) != "MGDL1") throw ParseError(path, 0, "bad model magic");
    FeatureVector w{};
    for (double& v : w) v = read_le(in, path);
    const double b = read_le(in, path);
    if (in.peek() != std::char_traits<char>::eof()) throw ParseError(path, 0, "trailing bytes in model file");
    return LinearClassifier(w, b);
  }

 private:
  static void write_le(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    out.write(buf, 8);
  }
  static double read_le(std::istream& in, const std::string& path) {
    unsigned char buf[8];
    in.read(reinterpret_cast<char*>(buf), 8);
    if (!in) throw ParseError(path, 0, "truncated model file");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return std::bit_cast<double>(bits);
  }

  FeatureVector weights_{};
  double bias_ = 0.0;
};

struct LabeledCrop {
  Frame crop;
  int label = 0;  // 1 = MAV, 0 = clutter
};

struct TrainParams {
  double learning_rate = 0.1;
  int epochs = 500;
  double l2 = 1e-4;
  std::uint64_t shuffle_seed = 0;
};

/// Mean log-loss of `model` over `samples`.
inline double log_loss(const LinearClassifier& model, const std::vector<LabeledCrop>& samples) {
  double total = 0.0;
  for (const LabeledCrop& s : samples) {
    const double z = model.logit(extract_features(s.crop));
    // log(1 + exp(-y' z)) with y' in {-1, +1}, evaluated stably.
    const double m = s.label ? -z : z;
    total += m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
  }
  return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

/// Per-sample gradient descent on L2-regularised log-loss. Sample order is
/// reshuffled every epoch from `shuffle_seed`.
inline LinearClassifier train_linear_classifier(const std::vector<LabeledCrop>& samples, const TrainParams& params = {}) {
  bool has_pos = false;
  bool has_neg = false;
  for (const LabeledCrop& s : samples) {
    if (s.label != 0 && s.label != 1) throw InvalidInput("train_linear_classifier: labels must be 0 or 1");
    (s.label ? has_pos : has_neg) = true;
    if (s.crop.width() != kClassifierSide || s.crop.height() != kClassifierSide) {
      throw InvalidInput("train_linear_classifier: crops must be 32x32");
    }
  }
  if (!has_pos || !has_neg) {
    throw InvalidInput("train_linear_classifier: both classes are required");
  }
  std::vector<FeatureVector> x;
  x.reserve(samples.size());
  for (const LabeledCrop& s : samples) x.push_back(LinearClassifier::scaled(extract_features(s.crop)));

  FeatureVector w{};
  double b = 0.0;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(params.shuffle_seed);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const double z = std::inner_product(x[i].begin(), x[i].end(), w.begin(), b);
      const double err = LinearClassifier::sigmoid(z) - samples[i].label;
      for (std::size_t j = 0; j < kFeatureCount; ++j) {
        w[j] -= params.learning_rate * (err * x[i][j] + params.l2 * w[j]);
      }
      b -= params.learning_rate * err;
    }
  }
  return LinearClassifier(w, b);
}

// ---------------------------------------------------------------------------
// Built-in detector

/// Otsu threshold over a 256-bin histogram. Returns the smallest level t such
/// that splitting into [0, t) and [t, 255] maximises between-class variance;
/// returns 256 for a single-valued histogram.
inline int otsu_threshold(const std::array<std::int64_t, 256>& hist) {
  std::int64_t total = 0;
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) {
    total += hist[static_cast<std::size_t>(i)];
    sum_all += static_cast<double>(i) * hist[static_cast<std::size_t>(i)];
  }
  std::int64_t w0 = 0;
  double sum0 = 0.0;
  double best = 0.0;
  int best_t = 256;
  for (int t = 1; t < 256; ++t) {
    w0 += hist[static_cast<std::size_t>(t - 1)];
    sum0 += static_cast<double>(t - 1) * hist[static_cast<std::size_t>(t - 1)];
    const std::int64_t w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / static_cast<double>(w0);
    const double m1 = (sum_all - sum0) / static_cast<double>(w1);
    const double between = static_cast<double>(w0) * static_cast<double>(w1) * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_t = t;
    }
  }
  return best_t;
}

struct CentroidParams {
  int background_radius = 10;  // box filter radius for the local background
  int min_deviation = 16;      // floor on the Otsu level of the deviation map
  int min_area = 4;
  double contrast_scale = 128.0;  // confidence = min(1, contrast / scale)
};

/// Blob detector: thresholds the absolute deviation from a local box-filtered
/// background at Otsu's level and reports each 8-connected blob with its mean
/// deviation, normalised by `contrast_scale`, as confidence. Bright and dark
/// blobs are labelled separately so a target does not merge with adjacent
/// texture of the opposite sign. Output lists bright blobs first.
class CentroidDetector final : public Detector {
 public:
  explicit CentroidDetector(CentroidParams params = {}) : params_(params) {}

  std::vector<Detection> detect(const Frame& crop) override {
    const int w = crop.width();
    const int h = crop.height();
    std::vector<std::int64_t> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0);
    for (int y = 0; y < h; ++y) {
      std::int64_t row = 0;
      for (int x = 0; x < w; ++x) {
        row += crop.at(x, y);
        integral[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
            integral[static_cast<std::size_t>(y) * (w + 1) + x + 1] + row;
      }
    }
    auto box_sum = [&](int x0, int y0, int x1, int y1) {
      auto at = [&](int x, int y) { return integral[static_cast<std::size_t>(y) * (w + 1) + x]; };
      return at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
    };

    const int r = params_.background_radius;
    std::vector<std::int16_t> dev(static_cast<std::size_t>(w) * h);  // signed
    std::array<std::int64_t, 256> hist{};
    for (int y = 0; y < h; ++y) {
      const int y0 = std::max(0, y - r);
      const int y1 = std::min(h, y + r + 1);
      for (int x = 0; x < w; ++x) {
        const int x0 = std::max(0, x - r);
        const int x1 = std::min(w, x + r + 1);
        const double mean = static_cast<double>(box_sum(x0, y0, x1, y1)) / ((x1 - x0) * (y1 - y0));
        const auto d = static_cast<int>(std::lround(crop.at(x, y) - mean));
        dev[static_cast<std::size_t>(y) * w + x] = static_cast<std::int16_t>(d);
        ++hist[static_cast<std::size_t>(std::abs(d))];
      }
    }
    const int level = std::max(otsu_threshold(hist), params_.min_deviation);
    if (level > 255) return {};

    std::vector<Detection> out;
    for (const int sign : {1, -1}) {
      BinaryMask fg(w, h);
      for (std::size_t i = 0; i < dev.size(); ++i) fg.bits()[i] = sign * dev[i] >= level ? 1 : 0;
      for (const Component& c : connected_components(fg)) {
        if (c.area < params_.min_area) continue;
        // Mean deviation over the blob's own pixels.
        double total = 0.0;
        std::int64_t count = 0;
        const int bx = static_cast<int>(c.box.x);
        const int by = static_cast<int>(c.box.y);
        for (int y = by; y < by + static_cast<int>(c.box.h); ++y) {
          for (int x = bx; x < bx + static_cast<int>(c.box.w); ++x) {
            if (fg.at(x, y)) {
              total += sign * dev[static_cast<std::size_t>(y) * w + x];
              ++count;
            }
          }
        }
        const double contrast = count ? total / static_cast<double>(count) : 0.0;
        out.push_back({c.box, std::min(1.0, contrast / params_.contrast_scale), Stage::kRefined});
      }
    }
    return out;
  }

 private:
  CentroidParams params_;
};

}  // namespace mgd
