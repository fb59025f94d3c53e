#include "chainflow/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace chainflow {

namespace {

constexpr int kMaxIterations = 100;
constexpr double kTolerance = 1e-6;
constexpr int kMaxLevel = 6;

std::size_t cells(int extent, int stride) {
  return static_cast<std::size_t>((extent + stride - 1) / stride);
}

// Center of grid cell `i`, pulled inside the image for a trailing partial
// cell.
double cell_center(int i, int stride, int extent) {
  const double lo = static_cast<double>(stride) * i;
  const double hi = std::min(lo + stride, static_cast<double>(extent));
  return 0.5 * (lo + hi);
}

}  // namespace

void AnchorConfig::validate() const {
  if (image_w <= 0 || image_h <= 0) {
    throw std::invalid_argument("anchor grid: image dimensions must be > 0");
  }
  if (scales.empty() || scales.size() != strides.size()) {
    throw std::invalid_argument(
        "anchor grid: need exactly one scale per stride/level");
  }
  if (first_level < 2 ||
      first_level + static_cast<int>(scales.size()) - 1 > kMaxLevel) {
    throw std::invalid_argument("anchor grid: levels must lie in 2..6");
  }
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw std::invalid_argument("anchor grid: ratio must be positive");
  }
  for (std::size_t i = 0; i < scales.size(); ++i) {
    if (!(scales[i] > 0.0) || !std::isfinite(scales[i])) {
      throw std::invalid_argument("anchor grid: scales must be positive");
    }
    if (i > 0 && !(scales[i] > scales[i - 1])) {
      throw std::invalid_argument(
          "anchor grid: scales must be strictly increasing");
    }
    if (strides[i] <= 0) {
      throw std::invalid_argument("anchor grid: strides must be positive");
    }
  }
}

std::vector<double> kmeans_scales(std::span<const Boxd> gt_boxes, int k,
                                  std::uint64_t seed) {
  if (gt_boxes.empty()) {
    throw std::invalid_argument("kmeans_scales: no boxes");
  }
  if (k < 1) {
    throw std::invalid_argument("kmeans_scales: k must be >= 1");
  }

  std::vector<double> values;
  values.reserve(gt_boxes.size());
  for (const auto& b : gt_boxes) values.push_back(std::sqrt(b.area()));
  std::sort(values.begin(), values.end());

  std::vector<double> distinct = values;
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  if (static_cast<std::size_t>(k) > distinct.size()) {
    throw std::invalid_argument("kmeans_scales: k=" + std::to_string(k) +
                                " exceeds the " +
                                std::to_string(distinct.size()) +
                                " distinct scales");
  }

  std::vector<double> centroids(k);
  for (int i = 0; i < k; ++i) {
    const auto pos = static_cast<std::size_t>(
        (i + 0.5) * static_cast<double>(distinct.size()) / k);
    centroids[i] = distinct[std::min(pos, distinct.size() - 1)];
  }

  std::mt19937_64 rng(seed);
  std::vector<int> label(values.size(), 0);
  std::vector<double> sum(k);
  std::vector<std::size_t> count(k);
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    for (std::size_t n = 0; n < values.size(); ++n) {
      int best = 0;
      for (int c = 1; c < k; ++c) {
        if (std::abs(values[n] - centroids[c]) <
            std::abs(values[n] - centroids[best])) {
          best = c;
        }
      }
      label[n] = best;
    }

    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t n = 0; n < values.size(); ++n) {
      sum[label[n]] += values[n];
      ++count[label[n]];
    }

    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      double next;
      if (count[c] > 0) {
        next = sum[c] / static_cast<double>(count[c]);
      } else {
        // Empty cluster: restart it on one of the worst-fit points.
        double worst = -1.0;
        std::vector<std::size_t> candidates;
        for (std::size_t n = 0; n < values.size(); ++n) {
          const double d = std::abs(values[n] - centroids[label[n]]);
          if (d > worst) {
            worst = d;
            candidates.assign(1, n);
          } else if (d == worst) {
            candidates.push_back(n);
          }
        }
        std::uniform_int_distribution<std::size_t> pick(
            0, candidates.size() - 1);
        next = values[candidates[pick(rng)]];
      }
      shift = std::max(shift, std::abs(next - centroids[c]));
      centroids[c] = next;
    }
    if (shift < kTolerance) break;
  }

  std::sort(centroids.begin(), centroids.end());
  return centroids;
}

std::size_t anchor_count(const AnchorConfig& cfg) {
  cfg.validate();
  std::size_t total = 0;
  for (int stride : cfg.strides) {
    total += cells(cfg.image_w, stride) * cells(cfg.image_h, stride);
  }
  return total;
}

std::vector<ChainedAnchor> build_anchor_grid(const AnchorConfig& cfg) {
  std::vector<ChainedAnchor> anchors;
  anchors.reserve(anchor_count(cfg));
  const double root = std::sqrt(cfg.ratio);
  for (std::size_t l = 0; l < cfg.scales.size(); ++l) {
    const int stride = cfg.strides[l];
    const double w = cfg.scales[l] / root;
    const double h = cfg.scales[l] * root;
    const int level = cfg.first_level + static_cast<int>(l);
    const auto nx = cells(cfg.image_w, stride);
    const auto ny = cells(cfg.image_h, stride);
    for (std::size_t j = 0; j < ny; ++j) {
      const double cy = cell_center(static_cast<int>(j), stride, cfg.image_h);
      for (std::size_t i = 0; i < nx; ++i) {
        anchors.push_back(
            {cell_center(static_cast<int>(i), stride, cfg.image_w), cy, w, h,
             level});
      }
    }
  }
  return anchors;
}

}  // namespace chainflow
