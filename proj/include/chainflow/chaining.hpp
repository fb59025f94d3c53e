// Node chaining: links the box pairs of adjacent nodes by IoU matching on
// their common frame and keeps unmatched tracklets alive on a constant
// velocity model for a bounded number of frames.
#pragma once

#include <Eigen/Core>

#include <optional>
#include <span>
#include <vector>

#include "chainflow/assignment.hpp"
#include "chainflow/postprocess.hpp"
#include "chainflow/sequence.hpp"

namespace chainflow {

/// Box pairs of the node (F_t, F_t+1): first boxes in frame t, second boxes
/// in frame t + 1.
struct Node {
  int t = 0;
  std::vector<BoxPair> pairs;
};

struct TrackerParams {
  double iou_match_thresh = 0.5;
  int sigma = 10;
  double nms_thresh = 0.7;
  double conf_thresh = 0.4;
  // Emit linearly interpolated boxes for frames a tracklet spent retained
  // once it is matched again.
  bool fill_gaps = false;

  void validate() const;
};

enum class TrackletState { kActive, kRetained, kTerminated };

enum class EntrySource {
  kDetected,     // first box of a matched pair
  kLookahead,    // second box of the last pair, emitted when the chain breaks
  kInterpolated  // gap filling
};

struct TrackEntry {
  int frame;
  Boxd box;
  double score;
  EntrySource source;
};

struct Tracklet {
  int identity = 0;
  std::vector<TrackEntry> entries;
  // Second box of the most recent matched pair; the candidate for the next
  // node while the tracklet is active.
  std::optional<Boxd> lookahead;
  double lookahead_score = 0.0;
  // Consecutive frames without an emitted box.
  int miss_count = 0;
  // Per-frame (dx, dy, dw, dh) from the last two detected entries.
  Eigen::Vector4d velocity = Eigen::Vector4d::Zero();
  TrackletState state = TrackletState::kActive;

  /// Most recent entry that came from a detected first box.
  const TrackEntry& last_detected() const;
};

/// Extrapolates the last detected box `tau` frames ahead with the tracklet's
/// velocity. Width and height are floored at one pixel.
Boxd predict_velocity(const Tracklet& tracklet, int tau);

/// Everything the tracker carries between nodes.
struct TrackerState {
  std::vector<Tracklet> tracklets;
  int next_identity = 1;
};

/// Chains `node` onto the tracklets: lookahead boxes of active tracklets and
/// predictions of retained ones are matched to the node's first boxes with
/// cost 1 - IoU (cells below the match threshold forbidden). Unmatched pairs
/// start new tracklets; unmatched tracklets are retained for up to sigma
/// frames. The node is used as given, without post-processing.
void chain_node(TrackerState& state, const Node& node,
                const TrackerParams& params);

/// soft-NMS followed by confidence filtering.
Node postprocess_node(const Node& node, const TrackerParams& params);

/// Runs post-processing and chaining over every node in frame order and
/// returns the emitted boxes. Frames between nodes count as empty nodes; when
/// `frame_count` is given the sequence is stepped through frame
/// frame_count - 1.
Trajectories run_tracker(std::span<const Node> nodes,
                         const TrackerParams& params = {},
                         std::optional<int> frame_count = std::nullopt);

/// Emitted boxes of a set of tracklets.
Trajectories collect_trajectories(std::span<const Tracklet> tracklets);

}  // namespace chainflow
