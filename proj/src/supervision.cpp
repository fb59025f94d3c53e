#include "chainflow/supervision.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace chainflow {

void AssignmentParams::validate() const {
  if (!(0.0 <= t_neg && t_neg < t_pos && t_pos <= 1.0)) {
    throw std::invalid_argument(
        "assignment thresholds must satisfy 0 <= t_neg < t_pos <= 1");
  }
}

void LossWeights::validate() const {
  if (alpha < 0 || beta < 0 || focal_gamma < 0 || focal_alpha < 0 ||
      focal_alpha > 1) {
    throw std::invalid_argument("loss weights must be non-negative");
  }
}

AnchorLabels assign_labels(std::span<const ChainedAnchor> anchors,
                           const GroundTruthFrame& gt_t,
                           const GroundTruthFrame& gt_t1,
                           const AssignmentParams& params) {
  if (anchors.empty()) {
    throw std::invalid_argument("assign_labels: empty anchor list");
  }
  params.validate();
  gt_t.validate();
  gt_t1.validate();

  std::vector<int> visible;
  for (std::size_t j = 0; j < gt_t.size(); ++j) {
    if (gt_t.visibilities[j] > params.min_visibility) {
      visible.push_back(static_cast<int>(j));
    }
  }
  std::unordered_map<int, int> next_index;
  for (std::size_t k = 0; k < gt_t1.size(); ++k) {
    if (gt_t1.visibilities[k] > params.min_visibility) {
      next_index.emplace(gt_t1.identities[k], static_cast<int>(k));
    }
  }

  const auto n_anchor = static_cast<Eigen::Index>(anchors.size());
  const auto n_gt = static_cast<Eigen::Index>(visible.size());
  std::vector<Boxd> anchor_boxes;
  anchor_boxes.reserve(anchors.size());
  for (const auto& a : anchors) anchor_boxes.push_back(a.box());

  Eigen::MatrixXd overlap(n_anchor, n_gt);
  for (Eigen::Index i = 0; i < n_anchor; ++i) {
    for (Eigen::Index j = 0; j < n_gt; ++j) {
      overlap(i, j) = iou(anchor_boxes[i], gt_t.boxes[visible[j]]);
    }
  }

  AnchorLabels labels(anchors.size());
  std::vector<double> matched_iou(anchors.size(), 0.0);
  for (Eigen::Index i = 0; i < n_anchor; ++i) {
    auto& label = labels[i];
    if (n_gt == 0) continue;
    Eigen::Index best = 0;
    const double max_iou = overlap.row(i).maxCoeff(&best);
    matched_iou[i] = max_iou;
    if (max_iou >= params.t_pos) {
      label.cls = AnchorClass::kPositive;
      label.gt_t = visible[best];
    } else if (max_iou < params.t_neg) {
      label.cls = AnchorClass::kNegative;
    } else {
      label.cls = AnchorClass::kIgnore;
    }
  }

  // Every ground truth keeps at least its best anchor.
  std::vector<bool> forced(anchors.size(), false);
  for (Eigen::Index j = 0; j < n_gt; ++j) {
    Eigen::Index best = 0;
    const double best_iou = overlap.col(j).maxCoeff(&best);
    if (!(best_iou > 0.0)) continue;
    if (forced[best] && matched_iou[best] >= best_iou) continue;
    forced[best] = true;
    matched_iou[best] = best_iou;
    labels[best].cls = AnchorClass::kPositive;
    labels[best].gt_t = visible[j];
  }

  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& label = labels[i];
    if (!label.positive()) continue;
    label.target_t = encode_offsets(anchor_boxes[i], gt_t.boxes[label.gt_t]);
    const auto it = next_index.find(gt_t.identities[label.gt_t]);
    if (it != next_index.end()) {
      label.gt_t1 = it->second;
      label.c_id = 1;
      label.target_t1 =
          encode_offsets(anchor_boxes[i], gt_t1.boxes[label.gt_t1]);
    } else {
      label.c_id = 0;
    }
  }
  return labels;
}

namespace {

void check_aligned(std::size_t n_pred, std::size_t n_label) {
  if (n_pred != n_label) {
    throw std::invalid_argument("loss: " + std::to_string(n_pred) +
                                " predictions vs " + std::to_string(n_label) +
                                " labels");
  }
}

std::size_t count_positives(std::span<const AnchorLabel> labels) {
  return static_cast<std::size_t>(
      std::count_if(labels.begin(), labels.end(),
                    [](const AnchorLabel& l) { return l.positive(); }));
}

double cls_normalizer(const LossWeights& w, std::size_t positives) {
  if (!w.normalize_cls) return 1.0;
  return static_cast<double>(std::max<std::size_t>(positives, 1));
}

}  // namespace

LossBreakdown total_loss(std::span<const AnchorPrediction> predictions,
                         std::span<const AnchorLabel> labels,
                         const LossWeights& weights) {
  check_aligned(predictions.size(), labels.size());
  LossBreakdown out;
  out.positives = count_positives(labels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& label = labels[i];
    const auto& pred = predictions[i];
    if (label.cls == AnchorClass::kIgnore) continue;
    if (label.positive()) {
      out.regression +=
          label.has_target_t1()
              ? reg_loss(pred.pred_t, pred.pred_t1, label.target_t,
                         label.target_t1)
              : reg_loss_single(pred.pred_t, label.target_t);
      out.identity += focal_loss(pred.p_id, label.c_id, weights);
    }
    out.classification +=
        focal_loss(pred.p_cls, label.positive() ? 1 : 0, weights);
  }
  out.classification /= cls_normalizer(weights, out.positives);
  out.total = out.regression + weights.alpha * out.classification +
              weights.beta * out.identity;
  return out;
}

std::vector<AnchorPrediction> loss_gradients(
    std::span<const AnchorPrediction> predictions,
    std::span<const AnchorLabel> labels, const LossWeights& weights) {
  check_aligned(predictions.size(), labels.size());
  const double cls_scale =
      weights.alpha / cls_normalizer(weights, count_positives(labels));

  std::vector<AnchorPrediction> grads(predictions.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& label = labels[i];
    const auto& pred = predictions[i];
    auto& g = grads[i];
    g.p_cls = 0.0;
    g.p_id = 0.0;
    if (label.cls == AnchorClass::kIgnore) continue;
    if (label.positive()) {
      const double denom = label.has_target_t1() ? 8.0 : 4.0;
      for (int k = 0; k < 4; ++k) {
        g.pred_t(k) = smooth_l1_grad(pred.pred_t(k) - label.target_t(k)) /
                      denom;
        if (label.has_target_t1()) {
          g.pred_t1(k) =
              smooth_l1_grad(pred.pred_t1(k) - label.target_t1(k)) / denom;
        }
      }
      g.p_id = weights.beta * focal_loss_grad(pred.p_id, label.c_id, weights);
    }
    g.p_cls =
        cls_scale * focal_loss_grad(pred.p_cls, label.positive() ? 1 : 0,
                                    weights);
  }
  return grads;
}

namespace {

// Flat view over the ten scalars of a prediction.
double& coordinate(AnchorPrediction& p, int k) {
  if (k == 0) return p.p_cls;
  if (k == 1) return p.p_id;
  if (k < 6) return p.pred_t(k - 2);
  return p.pred_t1(k - 6);
}

double coordinate(const AnchorPrediction& p, int k) {
  if (k == 0) return p.p_cls;
  if (k == 1) return p.p_id;
  if (k < 6) return p.pred_t(k - 2);
  return p.pred_t1(k - 6);
}

// Residual magnitude in [0.05, 0.95] or [1.05, 3], i.e. clear of both the
// kink at |x| = 1 and of near-zero gradients.
double sample_residual(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double magnitude = unit(rng) < 0.5 ? 0.05 + 0.9 * unit(rng)
                                           : 1.05 + 1.95 * unit(rng);
  return unit(rng) < 0.5 ? -magnitude : magnitude;
}

}  // namespace

GradcheckReport gradient_check(std::uint64_t seed, int instances, double step,
                               double tolerance) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> prob(0.05, 0.95);
  std::uniform_real_distribution<double> offset(-1.0, 1.0);
  std::uniform_int_distribution<int> anchors_per(4, 24);

  GradcheckReport report;
  report.instances = instances;
  for (int inst = 0; inst < instances; ++inst) {
    const int n = anchors_per(rng);
    std::vector<AnchorLabel> labels(n);
    std::vector<AnchorPrediction> preds(n);
    for (int i = 0; i < n; ++i) {
      auto& l = labels[i];
      const double r = unit(rng);
      l.cls = r < 0.4   ? AnchorClass::kPositive
              : r < 0.9 ? AnchorClass::kNegative
                        : AnchorClass::kIgnore;
      auto& p = preds[i];
      p.p_cls = prob(rng);
      p.p_id = prob(rng);
      for (int k = 0; k < 4; ++k) {
        l.target_t(k) = offset(rng);
        l.target_t1(k) = offset(rng);
        p.pred_t(k) = l.target_t(k) + sample_residual(rng);
        p.pred_t1(k) = l.target_t1(k) + sample_residual(rng);
      }
      if (l.positive()) {
        l.gt_t = 0;
        l.c_id = unit(rng) < 0.7 ? 1 : 0;
        l.gt_t1 = l.c_id == 1 ? 0 : -1;
      }
    }

    const auto analytic = loss_gradients(preds, labels);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 10; ++k) {
        auto probe = preds;
        double& x = coordinate(probe[i], k);
        const double x0 = x;
        x = x0 + step;
        const double up = total_loss(probe, labels).total;
        x = x0 - step;
        const double down = total_loss(probe, labels).total;
        const double numeric = (up - down) / (2.0 * step);
        const double exact = coordinate(analytic[i], k);
        const double scale = std::max(std::abs(exact), std::abs(numeric));
        const double rel = scale == 0.0 ? 0.0 : std::abs(exact - numeric) / scale;
        report.max_rel_error = std::max(report.max_rel_error, rel);
        ++report.coordinates;
      }
    }
  }
  report.passed = report.max_rel_error < tolerance;
  return report;
}

}  // namespace chainflow
