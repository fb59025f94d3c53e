// Frame-indexed containers shared by the simulator, tracker, evaluator and
// file I/O. Frame indices are 0-based in memory.
#pragma once

#include <map>
#include <span>
#include <vector>

#include "chainflow/geometry.hpp"

namespace chainflow {

/// Annotated boxes of one frame. The three vectors run in parallel; identities
/// are unique within the frame.
struct GroundTruthFrame {
  int frame = 0;
  std::vector<Boxd> boxes;
  std::vector<int> identities;
  std::vector<double> visibilities;

  std::size_t size() const { return boxes.size(); }
  bool empty() const { return boxes.empty(); }
  void add(const Boxd& box, int identity, double visibility = 1.0) {
    boxes.push_back(box);
    identities.push_back(identity);
    visibilities.push_back(visibility);
  }
  void validate() const;
};

/// Boxes whose visibility is strictly above `min_visibility`.
GroundTruthFrame filter_visible(const GroundTruthFrame& frame,
                                double min_visibility);

struct TrackedBox {
  int identity;
  Boxd box;
  double score = 1.0;

  friend bool operator==(const TrackedBox&, const TrackedBox&) = default;
};

/// Frame -> boxes of that frame, sorted by identity.
using Trajectories = std::map<int, std::vector<TrackedBox>>;

/// Ground truth viewed as a trajectory table; visibility becomes the score.
Trajectories to_trajectories(std::span<const GroundTruthFrame> frames);

/// Sorts every frame by identity and rejects repeated identities in a frame.
void normalize(Trajectories& tracks);

/// Number of boxes across all frames.
std::size_t box_count(const Trajectories& tracks);

}  // namespace chainflow
