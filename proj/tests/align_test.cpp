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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mgd/align.hpp"
#include "mgd/synth.hpp"

namespace mgd {
namespace {

// Smooth texture, content displaced by (dx, dy).
Frame textured(int w, int h, double dx = 0.0, double dy = 0.0, double scale = 12.0) {
  Frame f(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      f.at(x, y) = detail::clamp_px(128.0 + 90.0 * detail::texture(x - dx, y - dy, scale, 42));
    }
  }
  return f;
}

double max_abs_diff(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) { return (a - b).cwiseAbs().maxCoeff(); }

TEST(Homography, NormalizedAndValidated) {
  Eigen::Matrix3d m;
  m << 2, 0, 4, 0, 2, 6, 0, 0, 2;
  const Homography h(m);
  EXPECT_EQ(h(2, 2), 1.0);
  EXPECT_EQ(h(0, 2), 2.0);
  EXPECT_THROW(Homography(Eigen::Matrix3d::Zero()), InvalidInput);
  Eigen::Matrix3d bad = Eigen::Matrix3d::Identity();
  bad(0, 0) = std::nan("");
  EXPECT_THROW(Homography{bad}, InvalidInput);
  EXPECT_THROW(Homography(Eigen::Matrix3d::Ones()), InvalidInput);
}

TEST(Homography, ComposeWithInverseIsIdentity) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 100; ++i) {
    Eigen::Matrix3d m = Eigen::Matrix3d::Identity();
    m(0, 0) += 0.1 * u(rng);
    m(0, 1) = 0.1 * u(rng);
    m(0, 2) = 20 * u(rng);
    m(1, 0) = 0.1 * u(rng);
    m(1, 1) += 0.1 * u(rng);
    m(1, 2) = 20 * u(rng);
    m(2, 0) = 1e-4 * u(rng);
    m(2, 1) = 1e-4 * u(rng);
    const Homography h(m);
    EXPECT_LT(max_abs_diff(compose(h, invert(h)).matrix(), Eigen::Matrix3d::Identity()), 1e-9);
  }
}

TEST(Homography, CornerMappingCommutesWithComposition) {
  const Homography a = Homography::rigid(3.0, {50, 40}, 2.0, -1.0);
  Eigen::Matrix3d pm = Eigen::Matrix3d::Identity();
  pm(2, 0) = 2e-4;
  pm(0, 1) = 0.05;
  const Homography b(pm);
  const Homography ab = compose(a, b);
  for (const Point2 p : {Point2{0, 0}, Point2{100, 0}, Point2{0, 80}, Point2{100, 80}, Point2{33.3, 12.5}}) {
    const Point2 q1 = ab.apply(p);
    const Point2 q2 = a.apply(b.apply(p));
    EXPECT_NEAR(q1.x, q2.x, 1e-9);
    EXPECT_NEAR(q1.y, q2.y, 1e-9);
  }
}

TEST(TransformBox, IdentityAndTranslation) {
  const BoundingBox b{0, 0, 10, 10};
  EXPECT_EQ(transform_box(Homography::identity(), b), b);
  EXPECT_EQ(transform_box(Homography::translation(5, 3), b), (BoundingBox{5, 3, 10, 10}));
}

TEST(SampleGrid, FullHd) {
  const auto pts = sample_grid(1920, 1080, 30, 20);
  ASSERT_EQ(pts.size(), 600u);
  EXPECT_EQ(pts[0], (Point2{32, 27}));
  EXPECT_EQ(pts[1], (Point2{96, 27}));
  EXPECT_EQ(pts[30], (Point2{32, 81}));
}

TEST(SampleGrid, SmallImages) {
  EXPECT_EQ(sample_grid(4, 4, 2, 2), (std::vector<Point2>{{1, 1}, {3, 1}, {1, 3}, {3, 3}}));
  EXPECT_EQ(sample_grid(2, 2, 2, 2), (std::vector<Point2>{{0.5, 0.5}, {1, 0.5}, {0.5, 1}, {1, 1}}));
  EXPECT_THROW(sample_grid(1, 10, 2, 2), InvalidInput);
  EXPECT_THROW(sample_grid(10, 10, 1, 2), InvalidInput);
}

TEST(FloatImage, WindowSamplingAgreesWithPointSampling) {
  const Frame f = textured(40, 30);
  const ImagePyramid p(f, 0);
  const FloatImage& img = p.image(0);
  std::vector<float> win(9 * 9);
  for (const Point2 c : {Point2{20.3, 15.7}, Point2{1.2, 2.9}, Point2{38.6, 28.1}, Point2{-3.0, 10.0}}) {
    img.sample_window(c.x, c.y, 4, win.data());
    for (int wy = 0; wy < 9; ++wy) {
      for (int wx = 0; wx < 9; ++wx) {
        EXPECT_NEAR(win[static_cast<std::size_t>(wy * 9 + wx)], img.sample(c.x - 4 + wx, c.y - 4 + wy), 1e-3);
      }
    }
  }
}

TEST(Pyramid, LevelSizesAndConstantImage) {
  const ImagePyramid p(Frame(101, 60, 0, 80), 3);
  ASSERT_EQ(p.levels(), 4);
  EXPECT_EQ(p.image(1).width, 51);
  EXPECT_EQ(p.image(1).height, 30);
  EXPECT_EQ(p.image(3).width, 13);
  for (int l = 0; l < p.levels(); ++l) {
    for (float v : p.image(l).data) EXPECT_FLOAT_EQ(v, 80.0f);
  }
}

TEST(LucasKanade, IdenticalFramesGiveZeroFlow) {
  const Frame f = textured(160, 120);
  const auto pts = sample_grid(160, 120, 8, 6);
  for (const PointMatch& m : lk_track(f, f, pts)) {
    EXPECT_TRUE(m.tracked);
    EXPECT_NEAR(m.dst.x, m.src.x, 1e-6);
    EXPECT_NEAR(m.dst.y, m.src.y, 1e-6);
  }
}

TEST(LucasKanade, RecoversThreePixelShift) {
  const Frame a = textured(200, 160);
  const Frame b = textured(200, 160, 3.0, 0.0);
  const auto pts = sample_grid(200, 160, 10, 8);
  const auto matches = lk_track(a, b, pts);
  for (const PointMatch& m : matches) {
    if (m.src.x < 20 || m.src.x > 180 || m.src.y < 20 || m.src.y > 140) continue;
    ASSERT_TRUE(m.tracked);
    EXPECT_NEAR(m.dst.x - m.src.x, 3.0, 0.1);
    EXPECT_NEAR(m.dst.y - m.src.y, 0.0, 0.1);
  }
}

TEST(LucasKanade, ShiftPropertyUpToEightPixels) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-8.0, 8.0);
  const Frame a = textured(240, 180);
  const auto pts = sample_grid(240, 180, 12, 9);
  for (int trial = 0; trial < 10; ++trial) {
    double dx = u(rng);
    double dy = u(rng);
    const double n = std::hypot(dx, dy);
    if (n > 8.0) {
      dx *= 8.0 / n;
      dy *= 8.0 / n;
    }
    const Frame b = textured(240, 180, dx, dy);
    int interior = 0;
    int good = 0;
    for (const PointMatch& m : lk_track(a, b, pts)) {
      if (m.src.x < 30 || m.src.x > 210 || m.src.y < 30 || m.src.y > 150) continue;
      ++interior;
      if (m.tracked && std::abs(m.dst.x - m.src.x - dx) < 0.1 && std::abs(m.dst.y - m.src.y - dy) < 0.1) ++good;
    }
    EXPECT_GE(good, 0.9 * interior) << "shift " << dx << "," << dy;
  }
}

TEST(LucasKanade, FlatRegionIsNotTracked) {
  const Frame f(64, 64, 0, 100);
  const std::vector<Point2> pts = {{32, 32}};
  const auto m = lk_track(f, f, pts);
  EXPECT_FALSE(m[0].tracked);
}

TEST(LucasKanade, OutOfImagePointIsNotTracked) {
  const Frame f = textured(64, 64);
  const std::vector<Point2> pts = {{-1, 5}, {70, 5}};
  for (const PointMatch& m : lk_track(f, f, pts)) EXPECT_FALSE(m.tracked);
}

std::vector<PointMatch> mapped_grid(const Homography& h, int w, int h_, double noise, double outlier_frac,
                                    std::mt19937_64& rng, std::vector<bool>* is_inlier = nullptr) {
  std::normal_distribution<double> n(0.0, noise);
  std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h_), u01(0.0, 1.0);
  std::vector<PointMatch> out;
  for (const Point2& p : sample_grid(w, h_, 30, 20)) {
    Point2 q = h.apply(p);
    const bool outlier = u01(rng) < outlier_frac;
    if (outlier) {
      q = {ux(rng), uy(rng)};
    } else if (noise > 0) {
      q.x += n(rng);
      q.y += n(rng);
    }
    out.push_back({p, q, true});
    if (is_inlier) is_inlier->push_back(!outlier);
  }
  return out;
}

TEST(Ransac, IdentityMatches) {
  std::mt19937_64 rng(2);
  const auto matches = mapped_grid(Homography::identity(), 640, 480, 0.0, 0.0, rng);
  const auto est = estimate_homography(std::span<const PointMatch>(matches), rng);
  EXPECT_LT(max_abs_diff(est.h.matrix(), Eigen::Matrix3d::Identity()), 1e-6);
  EXPECT_EQ(est.inlier_count, matches.size());
}

TEST(Ransac, ExactOnCleanData) {
  std::mt19937_64 rng(3);
  Eigen::Matrix3d m;
  m << 1.02, 0.03, 7.0, -0.02, 0.98, -4.0, 2e-5, -1e-5, 1.0;
  const Homography truth(m);
  const auto matches = mapped_grid(truth, 640, 480, 0.0, 0.0, rng);
  const auto est = estimate_homography(std::span<const PointMatch>(matches), rng);
  EXPECT_EQ(est.h(2, 2), 1.0);
  for (const PointMatch& pm : matches) {
    const Point2 q = est.h.apply(pm.src);
    EXPECT_LT(std::hypot(q.x - pm.dst.x, q.y - pm.dst.y), 1e-6);
  }
}

TEST(Ransac, RecoversUnderOutliersAndNoise) {
  const Homography truth = Homography::rigid(1.0, {320, 240}, 5.0, 0.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::vector<bool> inlier;
    const auto matches = mapped_grid(truth, 640, 480, 0.5, 0.2, rng, &inlier);
    const auto est = estimate_homography(std::span<const PointMatch>(matches), rng);
    double err = 0;
    int n = 0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
      if (!inlier[i]) continue;
      const Point2 a = est.h.apply(matches[i].src);
      const Point2 b = truth.apply(matches[i].src);
      err += std::hypot(a.x - b.x, a.y - b.y);
      ++n;
    }
    EXPECT_LT(err / n, 1.0) << "seed " << seed;
  }
}

TEST(Ransac, TooFewMatchesFails) {
  std::mt19937_64 rng(4);
  std::vector<PointMatch> matches = {{{0, 0}, {1, 1}, true}, {{10, 0}, {11, 1}, true}, {{0, 10}, {1, 11}, true}};
  EXPECT_THROW(estimate_homography(std::span<const PointMatch>(matches), rng), EstimationFailure);
  matches.push_back({{10, 10}, {11, 11}, false});
  EXPECT_THROW(estimate_homography(std::span<const PointMatch>(matches), rng), EstimationFailure);
}

TEST(Warp, IdentityIsExact) {
  const Frame f = textured(37, 23);
  const WarpResult r = warp_perspective(f, Homography::identity());
  EXPECT_EQ(r.image.pixels(), f.pixels());
  EXPECT_EQ(r.valid.count(), r.valid.bits().size());
}

TEST(Warp, IntegerTranslationIsExact) {
  const Frame f = textured(50, 30);
  const WarpResult r = warp_perspective(f, Homography::translation(5, 0));
  for (int y = 0; y < 30; ++y) {
    for (int x = 0; x < 50; ++x) {
      if (x < 5) {
        EXPECT_FALSE(r.valid.at(x, y));
        EXPECT_EQ(r.image.at(x, y), 0);
      } else {
        EXPECT_TRUE(r.valid.at(x, y));
        EXPECT_EQ(r.image.at(x, y), f.at(x - 5, y));
      }
    }
  }
}

TEST(Warp, SubpixelAgreesWithFloatBilinear) {
  const Frame f = textured(64, 48);
  const ImagePyramid p(f, 0);
  const Homography h = Homography::rigid(7.0, {32, 24}, 1.3, -0.6);
  const Homography inv = invert(h);
  const WarpResult r = warp_perspective(f, h);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (!r.valid.at(x, y)) continue;
      const Point2 s = inv.apply({static_cast<double>(x), static_cast<double>(y)});
      EXPECT_NEAR(r.image.at(x, y), p.image(0).sample(s.x, s.y), 1.0);
    }
  }
}

TEST(Warp, RoundTripOnSmoothImage) {
  const Frame f = textured(160, 120, 0, 0, 24.0);
  const Homography h = Homography::rigid(4.0, {80, 60}, 3.5, -2.25);
  const WarpResult fwd = warp_perspective(f, h);
  const WarpResult back = warp_perspective(fwd.image, invert(h));
  double err = 0;
  int n = 0;
  for (int y = 20; y < 100; ++y) {
    for (int x = 20; x < 140; ++x) {
      err += std::abs(back.image.at(x, y) - f.at(x, y));
      ++n;
    }
  }
  EXPECT_LT(err / n, 2.0);
}

TEST(Alignment, RecoversSyntheticTranslation) {
  const Frame a = textured(320, 240);
  const Frame b = textured(320, 240, 2.0, -1.0);
  std::mt19937_64 rng(9);
  const auto est = estimate_alignment(ImagePyramid(a, 3), ImagePyramid(b, 3), rng);
  EXPECT_NEAR(est.h(0, 2), 2.0, 0.1);
  EXPECT_NEAR(est.h(1, 2), -1.0, 0.1);
}

}  // namespace
}  // namespace mgd
