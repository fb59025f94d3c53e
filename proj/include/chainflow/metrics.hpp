// CLEAR-MOT, identity F1 and trajectory coverage, plus aggregation of
// per-sequence reports into a totals row.
#pragma once

#include <optional>
#include <span>
#include <string>

#include "chainflow/sequence.hpp"

namespace chainflow {

/// One row of an evaluation table. Percentages are in [0, 100].
struct ClearReport {
  std::string name;
  double mota = 0.0;
  double idf1 = 0.0;
  double motp = 0.0;
  double mt = 0.0;
  double ml = 0.0;
  long fp = 0;
  long fn = 0;
  long ids = 0;
  long gt_count = 0;
  // Supporting counts used for aggregation.
  long matches = 0;
  long gt_tracks = 0;
  long mostly_tracked = 0;
  long mostly_lost = 0;

  long hyp_count() const { return matches + fp; }
};

struct ClearCounts {
  long fp = 0;
  long fn = 0;
  long ids = 0;
  long gt_count = 0;
  long matches = 0;
  double iou_sum = 0.0;
  double mota = 0.0;
  double motp = 0.0;
};

struct IdentityScore {
  long idtp = 0;
  long idfp = 0;
  long idfn = 0;
  double idf1 = 0.0;
};

struct Coverage {
  long tracks = 0;
  long mostly_tracked = 0;
  long mostly_lost = 0;
  double mt = 0.0;
  double ml = 0.0;
};

/// Inclusive frame range both sequences must lie in.
struct FrameRange {
  int first = 0;
  int last = 0;
};

/// CLEAR-MOT bookkeeping: previous correspondences persist while their IoU
/// stays at or above `iou_thresh`; the remaining boxes are matched by
/// Kuhn-Munkres on 1 - IoU. An identity switch is counted whenever a ground
/// truth is matched to a different hypothesis than at its last match.
ClearCounts clear_mot(const Trajectories& gt, const Trajectories& hyp,
                      double iou_thresh = 0.5,
                      std::optional<FrameRange> range = std::nullopt);

/// Identity F1 from the optimal global matching of ground-truth identities
/// to hypothesis identities.
IdentityScore idf1(const Trajectories& gt, const Trajectories& hyp,
                   double iou_thresh = 0.5,
                   std::optional<FrameRange> range = std::nullopt);

/// Share of ground-truth trajectories matched in >= 80% (MT) and <= 20% (ML)
/// of their frames under the CLEAR matching.
Coverage mt_ml(const Trajectories& gt, const Trajectories& hyp,
               double iou_thresh = 0.5,
               std::optional<FrameRange> range = std::nullopt);

/// All metrics for one sequence.
ClearReport evaluate(const std::string& name, const Trajectories& gt,
                     const Trajectories& hyp, double iou_thresh = 0.5,
                     std::optional<FrameRange> range = std::nullopt);

/// Totals row: counts are summed and MOTA recomputed from them; MOTP is
/// weighted by matches, IDF1 by ground-truth plus hypothesis boxes, MT and ML
/// by trajectory counts.
ClearReport aggregate(std::span<const ClearReport> reports,
                      const std::string& name = "Total");

/// 100 * (1 - (fp + fn + ids) / gt_count).
double mota_from_counts(long fp, long fn, long ids, long gt_count);

}  // namespace chainflow
