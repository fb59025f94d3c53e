#include <cmath>
#include <random>
#include <set>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "chainflow/simulator.hpp"
#include "chainflow/supervision.hpp"

using chainflow::AnchorClass;
using chainflow::Boxd;
using chainflow::ChainedAnchor;
using chainflow::GroundTruthFrame;

namespace {

ChainedAnchor anchor_from(const Boxd& b) {
  return {b.cx(), b.cy(), b.w(), b.h(), 2};
}

GroundTruthFrame frame_of(std::initializer_list<std::pair<Boxd, int>> items) {
  GroundTruthFrame f;
  for (const auto& [box, id] : items) f.add(box, id);
  return f;
}

}  // namespace

TEST(AssignLabels, ThresholdBoundaries) {
  const Boxd gt(0, 0, 10, 10);
  const std::vector<ChainedAnchor> anchors{
      anchor_from(gt),                  // IoU 1, also the forced match
      anchor_from(Boxd(0, 0, 10, 5)),   // IoU exactly 0.5
      anchor_from(Boxd(0, 0, 10, 4)),   // IoU exactly 0.4
      anchor_from(Boxd(0, 0, 10, 4.5)), // IoU 0.45
      anchor_from(Boxd(0, 0, 10, 3.9)), // IoU 0.39
      anchor_from(Boxd(50, 50, 5, 5)),  // no overlap
  };
  ASSERT_EQ(chainflow::iou(anchors[1].box(), gt), 0.5);
  ASSERT_EQ(chainflow::iou(anchors[2].box(), gt), 0.4);

  const auto frame = frame_of({{gt, 7}});
  const auto labels = chainflow::assign_labels(anchors, frame, frame);
  EXPECT_EQ(labels[0].cls, AnchorClass::kPositive);
  EXPECT_EQ(labels[1].cls, AnchorClass::kPositive);  // >= t_pos
  EXPECT_EQ(labels[2].cls, AnchorClass::kIgnore);    // not < t_neg
  EXPECT_EQ(labels[3].cls, AnchorClass::kIgnore);
  EXPECT_EQ(labels[4].cls, AnchorClass::kNegative);
  EXPECT_EQ(labels[5].cls, AnchorClass::kNegative);
  EXPECT_EQ(labels[1].gt_t, 0);
  EXPECT_EQ(labels[5].gt_t, -1);
}

TEST(AssignLabels, ForceMatchesBestAnchorBelowThreshold) {
  const Boxd gt(0, 0, 10, 10);
  const std::vector<ChainedAnchor> anchors{
      anchor_from(Boxd(0, 0, 10, 2)),  // IoU 0.2
      anchor_from(Boxd(0, 0, 10, 3)),  // IoU 0.3, best
      anchor_from(Boxd(0, 7, 10, 3)),  // IoU 0.3, tie; higher index loses
  };
  const auto frame = frame_of({{gt, 1}});
  const auto labels = chainflow::assign_labels(anchors, frame, frame);
  EXPECT_EQ(labels[0].cls, AnchorClass::kNegative);
  EXPECT_EQ(labels[1].cls, AnchorClass::kPositive);
  EXPECT_EQ(labels[1].gt_t, 0);
  EXPECT_EQ(labels[2].cls, AnchorClass::kNegative);
}

TEST(AssignLabels, AnchorEqualToGtIsPositiveWithZeroTarget) {
  const Boxd gt(20, 30, 12, 36);
  const std::vector<ChainedAnchor> anchors{anchor_from(gt)};
  const auto frame = frame_of({{gt, 3}});
  const auto labels = chainflow::assign_labels(anchors, frame, frame);
  ASSERT_TRUE(labels[0].positive());
  EXPECT_TRUE(labels[0].target_t.isZero(1e-12));
  EXPECT_TRUE(labels[0].target_t1.isZero(1e-12));
  EXPECT_EQ(labels[0].c_id, 1);
}

TEST(AssignLabels, IdentityLinkAcrossFrames) {
  const Boxd a(0, 0, 10, 30), b(100, 0, 10, 30);
  const auto gt_t = frame_of({{a, 1}, {b, 2}});
  // Identity 2 leaves; identity 1 moves and is listed second.
  const auto gt_t1 = frame_of({{Boxd(300, 0, 10, 30), 9}, {Boxd(2, 1, 10, 30), 1}});
  const std::vector<ChainedAnchor> anchors{anchor_from(a), anchor_from(b)};
  const auto labels = chainflow::assign_labels(anchors, gt_t, gt_t1);
  EXPECT_EQ(labels[0].c_id, 1);
  EXPECT_EQ(labels[0].gt_t1, 1);
  EXPECT_TRUE(labels[0].has_target_t1());
  EXPECT_NEAR(labels[0].target_t1(0), 0.2, 1e-12);
  EXPECT_NEAR(labels[0].target_t1(1), 1.0 / 30.0, 1e-12);
  EXPECT_EQ(labels[1].c_id, 0);
  EXPECT_FALSE(labels[1].has_target_t1());
}

TEST(AssignLabels, LowVisibilityGroundTruthIsSkipped) {
  GroundTruthFrame f;
  f.add(Boxd(0, 0, 10, 10), 1, 0.05);
  const std::vector<ChainedAnchor> anchors{anchor_from(Boxd(0, 0, 10, 10))};
  const auto labels = chainflow::assign_labels(anchors, f, f);
  EXPECT_EQ(labels[0].cls, AnchorClass::kNegative);
}

TEST(AssignLabels, RejectsEmptyAnchorsAndBadThresholds) {
  const auto f = frame_of({{Boxd(0, 0, 1, 1), 1}});
  const std::vector<ChainedAnchor> none;
  EXPECT_THROW(chainflow::assign_labels(none, f, f), std::invalid_argument);
  const std::vector<ChainedAnchor> one{anchor_from(Boxd(0, 0, 1, 1))};
  chainflow::AssignmentParams p;
  p.t_neg = 0.6;
  EXPECT_THROW(chainflow::assign_labels(one, f, f, p), std::invalid_argument);
}

// Partition property against an independent oracle on random scenes.
TEST(AssignLabels, PartitionMatchesOracle) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(0, 200), size(5, 60);
  for (int trial = 0; trial < 200; ++trial) {
    GroundTruthFrame gt;
    const int n_gt = 1 + trial % 5;
    for (int j = 0; j < n_gt; ++j) {
      gt.add(Boxd(pos(rng), pos(rng), size(rng), size(rng)), j + 1);
    }
    std::vector<ChainedAnchor> anchors;
    for (int i = 0; i < 60; ++i) {
      anchors.push_back(anchor_from(Boxd(pos(rng), pos(rng), size(rng), size(rng))));
    }
    const auto labels = chainflow::assign_labels(anchors, gt, gt);

    std::set<std::size_t> forced;
    for (int j = 0; j < n_gt; ++j) {
      std::size_t best = 0;
      double best_iou = -1;
      for (std::size_t i = 0; i < anchors.size(); ++i) {
        const double o = chainflow::iou(anchors[i].box(), gt.boxes[j]);
        if (o > best_iou) {
          best_iou = o;
          best = i;
        }
      }
      if (best_iou > 0) forced.insert(best);
    }
    for (std::size_t i = 0; i < anchors.size(); ++i) {
      double m = 0;
      for (int j = 0; j < n_gt; ++j) {
        m = std::max(m, chainflow::iou(anchors[i].box(), gt.boxes[j]));
      }
      if (forced.count(i)) {
        EXPECT_EQ(labels[i].cls, AnchorClass::kPositive);
      } else if (m >= 0.5) {
        EXPECT_EQ(labels[i].cls, AnchorClass::kPositive);
      } else if (m < 0.4) {
        EXPECT_EQ(labels[i].cls, AnchorClass::kNegative);
      } else {
        EXPECT_EQ(labels[i].cls, AnchorClass::kIgnore);
      }
      if (labels[i].positive()) {
        ASSERT_GE(labels[i].gt_t, 0);
        EXPECT_EQ(labels[i].c_id, 1);  // same frame twice: every id persists
      }
    }
  }
}

TEST(AssignLabels, IdentityLabelsOnSimulatedFrames) {
  chainflow::WorldConfig cfg;
  cfg.frames = 30;
  cfg.n_targets = 6;
  cfg.occlusions = {{2, 10, 5}, {4, 20, 3}};
  const auto seq = chainflow::gen_sequence(cfg, 17);
  int checked_links = 0, checked_breaks = 0;
  for (int t = 0; t + 1 < cfg.frames; ++t) {
    std::vector<ChainedAnchor> anchors;
    for (const auto& b : seq[t].boxes) anchors.push_back(anchor_from(b));
    const auto labels = chainflow::assign_labels(anchors, seq[t], seq[t + 1]);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      ASSERT_TRUE(labels[i].positive());
      const int id = seq[t].identities[labels[i].gt_t];
      bool present = false;
      for (int next : seq[t + 1].identities) present |= next == id;
      EXPECT_EQ(labels[i].c_id, present ? 1 : 0);
      if (present) {
        EXPECT_EQ(seq[t + 1].identities[labels[i].gt_t1], id);
        ++checked_links;
      } else {
        ++checked_breaks;
      }
    }
  }
  EXPECT_GT(checked_links, 100);
  EXPECT_EQ(checked_breaks, 2);
}

TEST(SmoothL1, ValuesAndSlope) {
  EXPECT_DOUBLE_EQ(chainflow::smooth_l1(0.5), 0.125);
  EXPECT_DOUBLE_EQ(chainflow::smooth_l1(-2.0), 1.5);
  EXPECT_DOUBLE_EQ(chainflow::smooth_l1(1.0), 0.5);
  EXPECT_DOUBLE_EQ(chainflow::smooth_l1_grad(0.3), 0.3);
  EXPECT_DOUBLE_EQ(chainflow::smooth_l1_grad(-4.0), -1.0);
}

TEST(RegLoss, AveragesEightResiduals) {
  chainflow::OffsetQuadd p = chainflow::OffsetQuadd::Zero();
  chainflow::OffsetQuadd q = chainflow::OffsetQuadd::Zero();
  chainflow::OffsetQuadd t = chainflow::OffsetQuadd::Constant(0.5);
  chainflow::OffsetQuadd t1 = chainflow::OffsetQuadd::Constant(2.0);
  // 4 * 0.125 + 4 * 1.5 over 8.
  EXPECT_DOUBLE_EQ(chainflow::reg_loss(p, q, t, t1), 0.8125);
  EXPECT_DOUBLE_EQ(chainflow::reg_loss_single(p, t), 0.125);
}

TEST(FocalLoss, HandValues) {
  const chainflow::LossWeights w;
  // -alpha (1-p)^2 log p and -(1-alpha) p^2 log(1-p) at p = 0.5.
  EXPECT_DOUBLE_EQ(chainflow::focal_loss(0.5, 1, w),
                   -0.25 * 0.25 * std::log(0.5));
  EXPECT_DOUBLE_EQ(chainflow::focal_loss(0.5, 0, w),
                   -0.75 * 0.25 * std::log(0.5));
  EXPECT_NEAR(chainflow::focal_loss(1.0, 1, w), 0.0, 1e-12);
  EXPECT_TRUE(std::isfinite(chainflow::focal_loss(0.0, 1, w)));
  EXPECT_DOUBLE_EQ(chainflow::focal_loss_grad(0.0, 1, w), 0.0);
}

TEST(FocalLoss, GradientMatchesCentralDifference) {
  const chainflow::LossWeights w;
  const double h = 1e-6;
  for (double p = 0.05; p < 0.96; p += 0.05) {
    for (int c : {0, 1}) {
      const double numeric = (chainflow::focal_loss(p + h, c, w) -
                              chainflow::focal_loss(p - h, c, w)) /
                             (2 * h);
      EXPECT_NEAR(chainflow::focal_loss_grad(p, c, w), numeric,
                  1e-7 * std::max(1.0, std::abs(numeric)));
    }
  }
}

TEST(TotalLoss, IgnoredAnchorsContributeNothing) {
  std::vector<chainflow::AnchorLabel> labels(3);
  labels[0].cls = AnchorClass::kPositive;
  labels[0].gt_t = 0;
  labels[0].gt_t1 = 0;
  labels[0].c_id = 1;
  labels[1].cls = AnchorClass::kNegative;
  labels[2].cls = AnchorClass::kIgnore;
  std::vector<chainflow::AnchorPrediction> preds(3);
  preds[0].pred_t = chainflow::OffsetQuadd::Constant(0.5);
  const chainflow::LossWeights w;
  const auto loss = chainflow::total_loss(preds, labels, w);
  EXPECT_EQ(loss.positives, 1u);
  EXPECT_DOUBLE_EQ(loss.regression, 4 * 0.125 / 8);
  EXPECT_DOUBLE_EQ(loss.identity, chainflow::focal_loss(0.5, 1, w));
  EXPECT_DOUBLE_EQ(loss.classification, chainflow::focal_loss(0.5, 1, w) +
                                            chainflow::focal_loss(0.5, 0, w));
  EXPECT_DOUBLE_EQ(loss.total,
                   loss.regression + loss.classification + loss.identity);

  preds[2].p_cls = 0.99;
  EXPECT_DOUBLE_EQ(chainflow::total_loss(preds, labels, w).total, loss.total);
  const auto grads = chainflow::loss_gradients(preds, labels, w);
  EXPECT_EQ(grads[2].p_cls, 0.0);
  EXPECT_TRUE(grads[1].pred_t.isZero(0.0));
}

TEST(TotalLoss, RejectsMisalignedInput) {
  std::vector<chainflow::AnchorLabel> labels(2);
  std::vector<chainflow::AnchorPrediction> preds(3);
  EXPECT_THROW(chainflow::total_loss(preds, labels), std::invalid_argument);
  EXPECT_THROW(chainflow::loss_gradients(preds, labels), std::invalid_argument);
}

TEST(GradientCheck, PassesOnRandomInstances) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto report = chainflow::gradient_check(seed, 50);
    EXPECT_TRUE(report.passed) << report.max_rel_error;
    EXPECT_LT(report.max_rel_error, 1e-5);
    EXPECT_GT(report.coordinates, 50u * 40u);
  }
}
