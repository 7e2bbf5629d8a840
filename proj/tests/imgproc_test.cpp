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

#include <algorithm>
#include <cstdlib>
#include <queue>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "mgd/imgproc.hpp"

namespace mgd {
namespace {

Frame random_frame(int w, int h, std::mt19937& rng) {
  Frame f(w, h);
  std::uniform_int_distribution<int> px(0, 255);
  for (auto& v : f.pixels()) v = static_cast<std::uint8_t>(px(rng));
  return f;
}

BinaryMask random_mask(int w, int h, double density, std::mt19937& rng) {
  BinaryMask m(w, h);
  std::bernoulli_distribution on(density);
  for (auto& b : m.bits()) b = on(rng) ? 1 : 0;
  return m;
}

BinaryMask from_rows(const std::vector<std::string>& rows) {
  BinaryMask m(static_cast<int>(rows[0].size()), static_cast<int>(rows.size()));
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) m.set(x, y, rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)] == '#');
  }
  return m;
}

// Reference labeling: BFS flood fill with 8-neighbours.
struct RefComponent {
  int area;
  int x0, y0, x1, y1;
};

std::vector<RefComponent> flood_components(const BinaryMask& m) {
  std::vector<int> seen(m.bits().size(), 0);
  std::vector<RefComponent> out;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(x, y) || seen[static_cast<std::size_t>(y * m.width() + x)]) continue;
      RefComponent c{0, x, y, x, y};
      std::queue<std::pair<int, int>> q;
      q.push({x, y});
      seen[static_cast<std::size_t>(y * m.width() + x)] = 1;
      while (!q.empty()) {
        auto [cx, cy] = q.front();
        q.pop();
        ++c.area;
        c.x0 = std::min(c.x0, cx);
        c.y0 = std::min(c.y0, cy);
        c.x1 = std::max(c.x1, cx);
        c.y1 = std::max(c.y1, cy);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx;
            const int ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= m.width() || ny >= m.height()) continue;
            const auto i = static_cast<std::size_t>(ny * m.width() + nx);
            if (m.at(nx, ny) && !seen[i]) {
              seen[i] = 1;
              q.push({nx, ny});
            }
          }
        }
      }
      out.push_back(c);
    }
  }
  return out;
}

TEST(AbsDiff, IdenticalFramesGiveZero) {
  std::mt19937 rng(1);
  const Frame a = random_frame(13, 7, rng);
  const Frame d = abs_diff(a, a);
  EXPECT_TRUE(std::all_of(d.pixels().begin(), d.pixels().end(), [](std::uint8_t v) { return v == 0; }));
}

TEST(AbsDiff, Constants) {
  const Frame d = abs_diff(Frame(4, 4, 0, 10), Frame(4, 4, 0, 3));
  EXPECT_TRUE(std::all_of(d.pixels().begin(), d.pixels().end(), [](std::uint8_t v) { return v == 7; }));
}

TEST(AbsDiff, MatchesScalarLoopAndIsSymmetric) {
  std::mt19937 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const Frame a = random_frame(8, 8, rng);
    const Frame b = random_frame(8, 8, rng);
    const Frame d = abs_diff(a, b);
    for (int y = 0; y < 8; ++y) {
      for (int x = 0; x < 8; ++x) EXPECT_EQ(d.at(x, y), std::abs(a.at(x, y) - b.at(x, y)));
    }
    EXPECT_EQ(d.pixels(), abs_diff(b, a).pixels());
  }
}

TEST(AbsDiff, SizeMismatchThrows) { EXPECT_THROW(abs_diff(Frame(4, 4), Frame(4, 5)), InvalidInput); }

TEST(Binarize, ThresholdIsInclusive) {
  Frame f(5, 5);
  EXPECT_EQ(binarize(f, 5).count(), 0u);
  f.at(2, 3) = 10;
  BinaryMask m = binarize(f, 5);
  EXPECT_EQ(m.count(), 1u);
  EXPECT_TRUE(m.at(2, 3));
  f.at(2, 3) = 5;
  EXPECT_TRUE(binarize(f, 5).at(2, 3));
  f.at(2, 3) = 4;
  EXPECT_FALSE(binarize(f, 5).at(2, 3));
}

TEST(Binarize, MonotoneInThreshold) {
  std::mt19937 rng(3);
  const Frame f = random_frame(32, 32, rng);
  for (int t = 0; t < 255; ++t) {
    const BinaryMask lo = binarize(f, t);
    const BinaryMask hi = binarize(f, t + 1);
    for (std::size_t i = 0; i < lo.bits().size(); ++i) EXPECT_LE(hi.bits()[i], lo.bits()[i]);
  }
}

TEST(Binarize, RejectsOutOfRangeThreshold) {
  EXPECT_THROW(binarize(Frame(2, 2), -1), InvalidInput);
  EXPECT_THROW(binarize(Frame(2, 2), 256), InvalidInput);
}

TEST(MaskLogic, SinglePixel) {
  BinaryMask a(6, 6);
  a.set(1, 2);
  const BinaryMask b(6, 6);
  EXPECT_TRUE(mask_or(a, b).at(1, 2));
  EXPECT_EQ(mask_or(a, b).count(), 1u);
  EXPECT_EQ(mask_and(a, b).count(), 0u);
  EXPECT_EQ(mask_or(a, a), a);
  EXPECT_EQ(mask_and(a, a), a);
}

TEST(MaskLogic, TruthTable) {
  std::mt19937 rng(4);
  const BinaryMask a = random_mask(16, 16, 0.5, rng);
  const BinaryMask b = random_mask(16, 16, 0.5, rng);
  const BinaryMask o = mask_or(a, b);
  const BinaryMask n = mask_and(a, b);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      EXPECT_EQ(o.at(x, y), a.at(x, y) || b.at(x, y));
      EXPECT_EQ(n.at(x, y), a.at(x, y) && b.at(x, y));
    }
  }
}

TEST(Morphology, OpeningRemovesIsolatedPixel) {
  BinaryMask m(9, 9);
  m.set(4, 4);
  EXPECT_EQ(morph_open(m).count(), 0u);
}

TEST(Morphology, ClosingFillsHole) {
  BinaryMask m = from_rows({
      ".......",
      ".#####.",
      ".#####.",
      ".##.##.",
      ".#####.",
      ".#####.",
      ".......",
  });
  const BinaryMask c = morph_close(m);
  EXPECT_TRUE(c.at(3, 3));
  EXPECT_EQ(c.count(), 25u);
}

TEST(Morphology, FourByFourSquareSurvivesOpening) {
  BinaryMask m(10, 10);
  for (int y = 3; y < 7; ++y) {
    for (int x = 2; x < 6; ++x) m.set(x, y);
  }
  const BinaryMask e = erode3x3(m);
  EXPECT_EQ(e.count(), 4u);
  EXPECT_EQ(morph_open(m), m);
}

TEST(Morphology, ErodeDilateMatchReference) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 20);
    const int h = 1 + static_cast<int>(rng() % 20);
    const BinaryMask m = random_mask(w, h, 0.6, rng);
    const BinaryMask e = erode3x3(m);
    const BinaryMask d = dilate3x3(m);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        bool all = true;
        bool any = false;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx;
            const int ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) {  // outside is background
              all = false;
              continue;
            }
            all = all && m.at(nx, ny);
            any = any || m.at(nx, ny);
          }
        }
        ASSERT_EQ(e.at(x, y), all) << w << "x" << h << " at " << x << "," << y;
        ASSERT_EQ(d.at(x, y), any) << w << "x" << h << " at " << x << "," << y;
      }
    }
  }
}

TEST(Morphology, OpenAndCloseAreIdempotent) {
  std::mt19937 rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask m = random_mask(24, 18, trial % 2 ? 0.35 : 0.65, rng);
    const BinaryMask o = morph_open(m);
    const BinaryMask c = morph_close(m);
    EXPECT_EQ(morph_open(o), o);
    EXPECT_EQ(morph_close(c), c);
  }
}

TEST(Morphology, RejectsZeroIterations) {
  EXPECT_THROW(morph_open(BinaryMask(3, 3), 0), InvalidInput);
  EXPECT_THROW(morph_close(BinaryMask(3, 3), 0), InvalidInput);
}

TEST(Components, EmptyMask) { EXPECT_TRUE(connected_components(BinaryMask(8, 8)).empty()); }

TEST(Components, DiagonalNeighboursJoin) {
  BinaryMask m(4, 4);
  m.set(1, 1);
  m.set(2, 2);
  const auto cc = connected_components(m);
  ASSERT_EQ(cc.size(), 1u);
  EXPECT_EQ(cc[0].area, 2);
  EXPECT_EQ(cc[0].box, (BoundingBox{1, 1, 2, 2}));
}

TEST(Components, HandLabelledMask) {
  const BinaryMask m = from_rows({
      "##......",
      ".#......",
      "........",
      "...####.",
      "...####.",
      "...####.",
      "...####.",
      "........",
  });
  const auto cc = connected_components(m);
  ASSERT_EQ(cc.size(), 2u);
  EXPECT_EQ(cc[0].label, 1);
  EXPECT_EQ(cc[0].area, 3);
  EXPECT_EQ(cc[0].box, (BoundingBox{0, 0, 2, 2}));
  EXPECT_EQ(cc[1].label, 2);
  EXPECT_EQ(cc[1].area, 16);
  EXPECT_EQ(cc[1].box, (BoundingBox{3, 3, 4, 4}));
}

TEST(Components, UShapeMergesAcrossRows) {
  const BinaryMask m = from_rows({
      "#...#",
      "#...#",
      "#####",
  });
  const auto cc = connected_components(m);
  ASSERT_EQ(cc.size(), 1u);
  EXPECT_EQ(cc[0].area, 9);
}

TEST(Components, AgreeWithFloodFill) {
  std::mt19937 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 40);
    const int h = 1 + static_cast<int>(rng() % 30);
    const BinaryMask m = random_mask(w, h, 0.1 + 0.5 * (trial % 5) / 4.0, rng);
    const auto cc = connected_components(m);
    const auto ref = flood_components(m);
    ASSERT_EQ(cc.size(), ref.size());

    long total = 0;
    for (const Component& c : cc) total += c.area;
    EXPECT_EQ(total, static_cast<long>(m.count()));

    // Same multiset of (area, box).
    auto key = [](int area, double x, double y, double w_, double h_) {
      return std::tuple<int, double, double, double, double>(area, x, y, w_, h_);
    };
    std::vector<std::tuple<int, double, double, double, double>> a, b;
    for (const Component& c : cc) a.push_back(key(c.area, c.box.x, c.box.y, c.box.w, c.box.h));
    for (const RefComponent& r : ref) b.push_back(key(r.area, r.x0, r.y0, r.x1 - r.x0 + 1, r.y1 - r.y0 + 1));
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);

    for (std::size_t i = 0; i < cc.size(); ++i) {
      EXPECT_EQ(cc[i].label, static_cast<int>(i) + 1);
      if (i > 0) {
        EXPECT_TRUE(cc[i - 1].box.y < cc[i].box.y || (cc[i - 1].box.y == cc[i].box.y && cc[i - 1].box.x <= cc[i].box.x));
      }
    }
  }
}

TEST(Components, BoxesAreTight) {
  std::mt19937 rng(8);
  const BinaryMask m = random_mask(30, 30, 0.3, rng);
  for (const Component& c : connected_components(m)) {
    const int x0 = static_cast<int>(c.box.x);
    const int y0 = static_cast<int>(c.box.y);
    const int x1 = x0 + static_cast<int>(c.box.w) - 1;
    const int y1 = y0 + static_cast<int>(c.box.h) - 1;
    auto row_has = [&](int y) {
      for (int x = x0; x <= x1; ++x) {
        if (m.at(x, y)) return true;
      }
      return false;
    };
    auto col_has = [&](int x) {
      for (int y = y0; y <= y1; ++y) {
        if (m.at(x, y)) return true;
      }
      return false;
    };
    EXPECT_TRUE(row_has(y0) && row_has(y1) && col_has(x0) && col_has(x1));
  }
}

TEST(Crop, WholeImageIsIdentity) {
  std::mt19937 rng(9);
  const Frame f = random_frame(12, 9, rng);
  EXPECT_EQ(crop(f, {0, 0, 12, 9}).pixels(), f.pixels());
}

TEST(Crop, OutOfBoundsThrows) { EXPECT_THROW(crop(Frame(10, 10), {5, 5, 6, 2}), InvalidInput); }

TEST(CropClamped, ClampsIntoImage) {
  const Frame f(1920, 1080);
  EXPECT_EQ(crop_clamped(f, {0, 0}, 320).offset, (Point2{0, 0}));
  const ClampedCrop c = crop_clamped(f, {1900, 540}, 320);
  EXPECT_EQ(c.offset.x, 1600);
  EXPECT_EQ(c.offset.y, 380);
  EXPECT_EQ(c.crop.width(), 320);
  EXPECT_EQ(c.crop.height(), 320);
}

TEST(CropClamped, SmallImageGivesFullExtent) {
  const ClampedCrop c = crop_clamped(Frame(100, 50), {50, 25}, 320);
  EXPECT_EQ(c.crop.width(), 100);
  EXPECT_EQ(c.crop.height(), 50);
  EXPECT_EQ(c.offset, (Point2{0, 0}));
}

TEST(Resize, SameSizeIsIdentity) {
  std::mt19937 rng(10);
  const Frame f = random_frame(17, 11, rng);
  EXPECT_EQ(resize_bilinear(f, 17, 11).pixels(), f.pixels());
}

TEST(Resize, ConstantStaysConstant) {
  const Frame r = resize_bilinear(Frame(7, 5, 0, 77), 32, 32);
  EXPECT_TRUE(std::all_of(r.pixels().begin(), r.pixels().end(), [](std::uint8_t v) { return v == 77; }));
}

TEST(Resize, HalvingRowsAveragesThem) {
  const Frame f(2, 2, 0, std::vector<std::uint8_t>{0, 100, 0, 100});
  const Frame r = resize_bilinear(f, 2, 1);
  EXPECT_EQ(r.at(0, 0), 0);
  EXPECT_EQ(r.at(1, 0), 100);
}

TEST(Resize, OutputWithinInputRange) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Frame f = random_frame(5 + trial, 9, rng);
    const auto [lo, hi] = std::minmax_element(f.pixels().begin(), f.pixels().end());
    const Frame r = resize_bilinear(f, 32, 32);
    for (std::uint8_t v : r.pixels()) {
      EXPECT_GE(v, *lo);
      EXPECT_LE(v, *hi);
    }
  }
}

TEST(Luma, Rec601) {
  EXPECT_EQ(luma601(255, 255, 255), 255);
  EXPECT_EQ(luma601(0, 0, 0), 0);
  EXPECT_EQ(luma601(255, 0, 0), 76);
}

}  // namespace
}  // namespace mgd
