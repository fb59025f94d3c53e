#include "chainflow/sequence.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>
#include <unordered_set>

namespace chainflow {

void GroundTruthFrame::validate() const {
  if (identities.size() != boxes.size() ||
      visibilities.size() != boxes.size()) {
    throw std::invalid_argument("frame " + std::to_string(frame) +
                                ": boxes/identities/visibilities differ in "
                                "length");
  }
  std::unordered_set<int> seen;
  for (int id : identities) {
    if (!seen.insert(id).second) {
      throw std::invalid_argument("frame " + std::to_string(frame) +
                                  ": duplicate identity " +
                                  std::to_string(id));
    }
  }
}

GroundTruthFrame filter_visible(const GroundTruthFrame& frame,
                                double min_visibility) {
  GroundTruthFrame out;
  out.frame = frame.frame;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (frame.visibilities[i] > min_visibility) {
      out.add(frame.boxes[i], frame.identities[i], frame.visibilities[i]);
    }
  }
  return out;
}

Trajectories to_trajectories(std::span<const GroundTruthFrame> frames) {
  Trajectories out;
  for (const auto& f : frames) {
    auto& row = out[f.frame];
    for (std::size_t i = 0; i < f.size(); ++i) {
      row.push_back({f.identities[i], f.boxes[i], f.visibilities[i]});
    }
    if (row.empty()) out.erase(f.frame);
  }
  normalize(out);
  return out;
}

void normalize(Trajectories& tracks) {
  for (auto& [frame, row] : tracks) {
    std::stable_sort(row.begin(), row.end(),
                     [](const TrackedBox& a, const TrackedBox& b) {
                       return a.identity < b.identity;
                     });
    for (std::size_t i = 1; i < row.size(); ++i) {
      if (row[i].identity == row[i - 1].identity) {
        throw std::invalid_argument("frame " + std::to_string(frame) +
                                    ": identity " +
                                    std::to_string(row[i].identity) +
                                    " appears twice");
      }
    }
  }
}

std::size_t box_count(const Trajectories& tracks) {
  std::size_t n = 0;
  for (const auto& [frame, row] : tracks) n += row.size();
  return n;
}

}  // namespace chainflow
