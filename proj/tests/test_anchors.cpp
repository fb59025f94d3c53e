#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "chainflow/anchors.hpp"

using chainflow::Boxd;

namespace {

// Exact 1-D k-means by dynamic programming over sorted values: clusters are
// contiguous runs, so cost(k, n) = min_j cost(k-1, j) + sse(j, n).
std::vector<double> optimal_centroids(std::vector<double> v, int k) {
  std::sort(v.begin(), v.end());
  const int n = static_cast<int>(v.size());
  std::vector<double> s(n + 1, 0.0), s2(n + 1, 0.0);
  for (int i = 0; i < n; ++i) {
    s[i + 1] = s[i] + v[i];
    s2[i + 1] = s2[i] + v[i] * v[i];
  }
  auto sse = [&](int a, int b) {  // values [a, b)
    const double m = (s[b] - s[a]) / (b - a);
    return (s2[b] - s2[a]) - m * (s[b] - s[a]);
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> cost(k + 1, std::vector<double>(n + 1, inf));
  std::vector<std::vector<int>> cut(k + 1, std::vector<int>(n + 1, 0));
  cost[0][0] = 0.0;
  for (int c = 1; c <= k; ++c) {
    for (int b = c; b <= n; ++b) {
      for (int a = c - 1; a < b; ++a) {
        const double total = cost[c - 1][a] + sse(a, b);
        if (total < cost[c][b]) {
          cost[c][b] = total;
          cut[c][b] = a;
        }
      }
    }
  }
  std::vector<double> centroids;
  for (int c = k, b = n; c > 0; --c) {
    const int a = cut[c][b];
    centroids.push_back((s[b] - s[a]) / (b - a));
    b = a;
  }
  std::sort(centroids.begin(), centroids.end());
  return centroids;
}

std::vector<Boxd> square_boxes(const std::vector<double>& scales) {
  std::vector<Boxd> boxes;
  for (double s : scales) boxes.emplace_back(0, 0, s, s);
  return boxes;
}

}  // namespace

TEST(KmeansScales, MatchesExactOptimumOnSeparatedClusters) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> scales;
    const double centers[] = {40, 85, 115, 160, 330};
    for (double c : centers) {
      std::normal_distribution<double> spread(c, 3.0);
      for (int i = 0; i < 60; ++i) scales.push_back(spread(rng));
    }
    const auto got = chainflow::kmeans_scales(square_boxes(scales), 5, trial);
    // sqrt(area) of a square box is its side up to rounding.
    std::vector<double> sides;
    for (const auto& b : square_boxes(scales)) sides.push_back(std::sqrt(b.area()));
    const auto want = optimal_centroids(sides, 5);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_NEAR(got[i], want[i], 1e-9) << "trial " << trial;
    }
  }
}

TEST(KmeansScales, CentroidsAreFixedPointsOfLloyd) {
  std::mt19937_64 rng(9);
  std::lognormal_distribution<double> scale(4.5, 0.6);
  std::vector<double> scales(400);
  for (auto& s : scales) s = scale(rng);
  const auto boxes = square_boxes(scales);
  const auto c = chainflow::kmeans_scales(boxes, 5, 3);
  ASSERT_TRUE(std::is_sorted(c.begin(), c.end()));

  std::vector<double> sum(c.size(), 0.0);
  std::vector<int> count(c.size(), 0);
  for (const auto& b : boxes) {
    const double v = std::sqrt(b.area());
    std::size_t best = 0;
    for (std::size_t j = 1; j < c.size(); ++j) {
      if (std::abs(v - c[j]) < std::abs(v - c[best])) best = j;
    }
    sum[best] += v;
    ++count[best];
  }
  for (std::size_t j = 0; j < c.size(); ++j) {
    ASSERT_GT(count[j], 0);
    EXPECT_NEAR(c[j], sum[j] / count[j], 1e-5);
  }
}

TEST(KmeansScales, DeterministicForSeed) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(20, 400);
  std::vector<double> scales(300);
  for (auto& s : scales) s = u(rng);
  const auto boxes = square_boxes(scales);
  EXPECT_EQ(chainflow::kmeans_scales(boxes, 5, 42),
            chainflow::kmeans_scales(boxes, 5, 42));
}

TEST(KmeansScales, UsesGeometricMeanOfSides) {
  // 2x8 and 4x4 boxes both have scale 4.
  const std::vector<Boxd> boxes{Boxd(0, 0, 2, 8), Boxd(0, 0, 4, 4),
                                Boxd(0, 0, 10, 10)};
  const auto c = chainflow::kmeans_scales(boxes, 2, 0);
  EXPECT_DOUBLE_EQ(c[0], 4.0);
  EXPECT_DOUBLE_EQ(c[1], 10.0);
}

TEST(KmeansScales, RejectsBadInput) {
  const std::vector<Boxd> none;
  EXPECT_THROW(chainflow::kmeans_scales(none, 1, 0), std::invalid_argument);
  const auto two = square_boxes({5, 5, 7});
  EXPECT_THROW(chainflow::kmeans_scales(two, 0, 0), std::invalid_argument);
  EXPECT_THROW(chainflow::kmeans_scales(two, 3, 0), std::invalid_argument);
  EXPECT_EQ(chainflow::kmeans_scales(two, 2, 0).size(), 2u);
}

TEST(AnchorGrid, CountMatchesCeilDivision) {
  const chainflow::AnchorConfig cfg;
  // ceil(1920/s) * ceil(1080/s) for s in {4, 8, 16, 32, 64}.
  const std::size_t want = 480 * 270 + 240 * 135 + 120 * 68 + 60 * 34 + 30 * 17;
  EXPECT_EQ(chainflow::anchor_count(cfg), want);
  EXPECT_EQ(chainflow::build_anchor_grid(cfg).size(), want);
}

TEST(AnchorGrid, ShapesAndCenters) {
  chainflow::AnchorConfig cfg;
  cfg.image_w = 20;
  cfg.image_h = 10;
  cfg.scales = {29.0};
  cfg.strides = {8};
  cfg.ratio = 2.9;
  const auto grid = chainflow::build_anchor_grid(cfg);
  ASSERT_EQ(grid.size(), 3u * 2u);
  for (const auto& a : grid) {
    EXPECT_EQ(a.level, 2);
    EXPECT_NEAR(a.h / a.w, 2.9, 1e-12);
    EXPECT_NEAR(std::sqrt(a.w * a.h), 29.0, 1e-12);
  }
  // Row-major; the trailing partial cell is centred on its visible part.
  EXPECT_DOUBLE_EQ(grid[0].cx, 4.0);
  EXPECT_DOUBLE_EQ(grid[1].cx, 12.0);
  EXPECT_DOUBLE_EQ(grid[2].cx, 18.0);
  EXPECT_DOUBLE_EQ(grid[0].cy, 4.0);
  EXPECT_DOUBLE_EQ(grid[3].cy, 9.0);
}

TEST(AnchorGrid, ValidatesConfig) {
  chainflow::AnchorConfig cfg;
  cfg.scales.pop_back();
  EXPECT_THROW(chainflow::build_anchor_grid(cfg), std::invalid_argument);
  cfg = {};
  cfg.scales[1] = cfg.scales[0];
  EXPECT_THROW(chainflow::build_anchor_grid(cfg), std::invalid_argument);
  cfg = {};
  cfg.ratio = 0.0;
  EXPECT_THROW(chainflow::build_anchor_grid(cfg), std::invalid_argument);
}

TEST(AnchorGrid, DefaultConfiguration) {
  const chainflow::AnchorConfig cfg;
  EXPECT_EQ(cfg.scales, (std::vector<double>{38, 86, 112, 156, 328}));
  EXPECT_EQ(cfg.strides, (std::vector<int>{4, 8, 16, 32, 64}));
  EXPECT_DOUBLE_EQ(cfg.ratio, 2.9);
}
