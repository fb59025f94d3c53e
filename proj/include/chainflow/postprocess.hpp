// Inference-side glue between raw paired predictions and chaining: the joint
// attention product, soft-NMS keyed on the first box, confidence filtering.
#pragma once

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <vector>

#include "chainflow/geometry.hpp"

namespace chainflow {

/// Two boxes of one target in the frames of a node, with the classification
/// and ID-verification confidences.
struct BoxPair {
  Boxd first;
  Boxd second;
  double cls_score = 1.0;
  double id_score = 1.0;

  friend bool operator==(const BoxPair&, const BoxPair&) = default;
};

/// Per-cell feature values on a width x height grid. Rows are cells in
/// row-major order (y * width + x), columns are channels.
template <typename Scalar>
struct ScoreGrid {
  using Storage = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  int width = 0;
  int height = 0;
  Storage values;

  ScoreGrid() = default;
  ScoreGrid(int w, int h, int channels)
      : width(w), height(h), values(Storage::Zero(Eigen::Index(w) * h,
                                                  channels)) {}

  int channels() const { return static_cast<int>(values.cols()); }
  Scalar& at(int x, int y, int c) { return values(Eigen::Index(y) * width + x, c); }
  Scalar at(int x, int y, int c) const {
    return values(Eigen::Index(y) * width + x, c);
  }
};

/// features * (cls_map * id_map), the single-channel attention broadcast
/// across every feature channel.
template <typename Scalar>
ScoreGrid<Scalar> joint_attention(const ScoreGrid<Scalar>& features,
                                  const ScoreGrid<Scalar>& cls_map,
                                  const ScoreGrid<Scalar>& id_map) {
  if (cls_map.channels() != 1 || id_map.channels() != 1) {
    throw std::invalid_argument("joint_attention: maps must be single-channel");
  }
  if (cls_map.width != features.width || cls_map.height != features.height ||
      id_map.width != features.width || id_map.height != features.height) {
    throw std::invalid_argument("joint_attention: spatial size mismatch");
  }
  const auto attention = (cls_map.values.col(0) * id_map.values.col(0)).eval();
  ScoreGrid<Scalar> out;
  out.width = features.width;
  out.height = features.height;
  out.values = features.values.colwise() * attention;
  return out;
}

/// Linear soft-NMS: repeatedly take the highest-scoring pair and scale the
/// cls_score of every remaining pair whose first-box IoU with it exceeds
/// `nms_thresh` by (1 - IoU). Returns every pair, sorted by decayed score.
std::vector<BoxPair> soft_nms(std::span<const BoxPair> pairs,
                              double nms_thresh);

/// Pairs with cls_score >= conf_thresh, in input order.
std::vector<BoxPair> filter_confidence(std::span<const BoxPair> pairs,
                                       double conf_thresh);

}  // namespace chainflow
