// Training-side math for paired-box supervision: label assignment against two
// ground-truth frames, offset targets, and the loss stack with its analytic
// gradients.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "chainflow/anchors.hpp"
#include "chainflow/geometry.hpp"
#include "chainflow/sequence.hpp"

namespace chainflow {

enum class AnchorClass { kNegative, kPositive, kIgnore };

/// Supervision for one anchor. Ground-truth indices refer to positions in the
/// frames passed to assign_labels; -1 means no match.
struct AnchorLabel {
  AnchorClass cls = AnchorClass::kNegative;
  int gt_t = -1;
  int gt_t1 = -1;
  int c_id = 0;
  OffsetQuadd target_t = OffsetQuadd::Zero();
  OffsetQuadd target_t1 = OffsetQuadd::Zero();

  bool positive() const { return cls == AnchorClass::kPositive; }
  bool has_target_t1() const { return gt_t1 >= 0; }
};

using AnchorLabels = std::vector<AnchorLabel>;

struct AssignmentParams {
  double t_pos = 0.5;
  double t_neg = 0.4;
  double min_visibility = 0.1;

  void validate() const;
};

/// Label every anchor as positive (max IoU >= t_pos), negative (< t_neg) or
/// ignore, then force each visible ground truth onto its best anchor. For
/// positives, c_id is 1 iff the matched identity is also present in `gt_t1`.
AnchorLabels assign_labels(std::span<const ChainedAnchor> anchors,
                           const GroundTruthFrame& gt_t,
                           const GroundTruthFrame& gt_t1,
                           const AssignmentParams& params = {});

struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double focal_gamma = 2.0;
  double focal_alpha = 0.25;
  // Divide the classification term by max(1, #positives).
  bool normalize_cls = true;

  void validate() const;
};

inline constexpr double kProbabilityClamp = 1e-7;

template <typename Scalar>
Scalar smooth_l1(Scalar x) {
  using std::abs;
  const Scalar ax = abs(x);
  return ax < Scalar(1) ? Scalar(0.5) * x * x : ax - Scalar(0.5);
}

template <typename Scalar>
Scalar smooth_l1_grad(Scalar x) {
  if (x >= Scalar(1)) return Scalar(1);
  if (x <= Scalar(-1)) return Scalar(-1);
  return x;
}

/// Mean smooth-L1 over the eight residuals of a box pair.
template <typename Scalar>
Scalar reg_loss(const OffsetQuad<Scalar>& pred_t,
                const OffsetQuad<Scalar>& pred_t1,
                const OffsetQuad<Scalar>& target_t,
                const OffsetQuad<Scalar>& target_t1) {
  Scalar sum(0);
  for (int i = 0; i < 4; ++i) {
    sum += smooth_l1<Scalar>(pred_t(i) - target_t(i));
    sum += smooth_l1<Scalar>(pred_t1(i) - target_t1(i));
  }
  return sum / Scalar(8);
}

/// Mean smooth-L1 over the four residuals of a single box.
template <typename Scalar>
Scalar reg_loss_single(const OffsetQuad<Scalar>& pred,
                       const OffsetQuad<Scalar>& target) {
  Scalar sum(0);
  for (int i = 0; i < 4; ++i) sum += smooth_l1<Scalar>(pred(i) - target(i));
  return sum / Scalar(4);
}

/// Binary focal loss of probability `p` against label `c`.
template <typename Scalar>
Scalar focal_loss(Scalar p, int c, const LossWeights& w) {
  using std::log;
  using std::pow;
  const Scalar lo(kProbabilityClamp);
  const Scalar q = std::clamp(p, lo, Scalar(1) - lo);
  const Scalar gamma(w.focal_gamma);
  if (c == 1) {
    return -Scalar(w.focal_alpha) * pow(Scalar(1) - q, gamma) * log(q);
  }
  return -(Scalar(1) - Scalar(w.focal_alpha)) * pow(q, gamma) *
         log(Scalar(1) - q);
}

/// d focal_loss / dp. Zero where the clamp is active.
template <typename Scalar>
Scalar focal_loss_grad(Scalar p, int c, const LossWeights& w) {
  using std::log;
  using std::pow;
  const Scalar lo(kProbabilityClamp);
  if (p < lo || p > Scalar(1) - lo) return Scalar(0);
  const Scalar gamma(w.focal_gamma);
  const Scalar a(w.focal_alpha);
  if (c == 1) {
    const Scalar r = Scalar(1) - p;
    return a * (gamma * pow(r, gamma - Scalar(1)) * log(p) - pow(r, gamma) / p);
  }
  const Scalar r = Scalar(1) - p;
  return -(Scalar(1) - a) *
         (gamma * pow(p, gamma - Scalar(1)) * log(r) - pow(p, gamma) / r);
}

/// Network-output surrogate for one anchor.
struct AnchorPrediction {
  double p_cls = 0.5;
  double p_id = 0.5;
  OffsetQuadd pred_t = OffsetQuadd::Zero();
  OffsetQuadd pred_t1 = OffsetQuadd::Zero();
};

struct LossBreakdown {
  double regression = 0.0;
  double classification = 0.0;  // before alpha
  double identity = 0.0;        // before beta
  double total = 0.0;
  std::size_t positives = 0;
};

/// reg + alpha * cls + beta * id, summed over anchors. Ignored anchors
/// contribute nothing; positives without a frame t+1 target regress only
/// their frame-t box.
LossBreakdown total_loss(std::span<const AnchorPrediction> predictions,
                         std::span<const AnchorLabel> labels,
                         const LossWeights& weights = {});

/// Gradient of total_loss(...).total with respect to every prediction scalar,
/// in the same layout as the predictions.
std::vector<AnchorPrediction> loss_gradients(
    std::span<const AnchorPrediction> predictions,
    std::span<const AnchorLabel> labels, const LossWeights& weights = {});

struct GradcheckReport {
  int instances = 0;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

/// Compares loss_gradients against central differences on random instances
/// whose regression residuals stay clear of the smooth-L1 kink.
GradcheckReport gradient_check(std::uint64_t seed, int instances = 100,
                               double step = 1e-5, double tolerance = 1e-5);

}  // namespace chainflow
