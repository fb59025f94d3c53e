// Chained-anchor priors: scale selection and dense grid placement.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "chainflow/geometry.hpp"

namespace chainflow {

/// Grid prior from which a pair of boxes (one per frame of a node) is decoded.
struct ChainedAnchor {
  double cx;
  double cy;
  double w;
  double h;
  int level;

  Boxd box() const { return Boxd::FromCenter(cx, cy, w, h); }
};

/// One scale and one stride per pyramid level, a single shared aspect ratio
/// (h / w), and the image the grid covers.
struct AnchorConfig {
  std::vector<double> scales{38.0, 86.0, 112.0, 156.0, 328.0};
  std::vector<int> strides{4, 8, 16, 32, 64};
  double ratio = 2.9;
  int first_level = 2;
  int image_w = 1920;
  int image_h = 1080;

  void validate() const;
};

/// 1-D Lloyd k-means over per-box scales sqrt(w * h). Returns the k centroids
/// in ascending order. Initialization uses evenly spaced quantiles of the
/// distinct scales; `seed` only drives re-seeding of clusters that empty out.
std::vector<double> kmeans_scales(std::span<const Boxd> gt_boxes, int k,
                                  std::uint64_t seed);

/// Number of anchors build_anchor_grid produces for `cfg`.
std::size_t anchor_count(const AnchorConfig& cfg);

/// One anchor per grid cell per level, w = s / sqrt(r), h = s * sqrt(r).
std::vector<ChainedAnchor> build_anchor_grid(const AnchorConfig& cfg);

}  // namespace chainflow
