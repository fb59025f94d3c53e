#include "chainflow/chaining.hpp"

#include <algorithm>
#include <stdexcept>

namespace chainflow {

void TrackerParams::validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(iou_match_thresh) || !in_unit(nms_thresh) ||
      !in_unit(conf_thresh)) {
    throw std::invalid_argument("tracker thresholds must lie in [0, 1]");
  }
  if (sigma < 0) {
    throw std::invalid_argument("tracker sigma must be >= 0");
  }
}

const TrackEntry& Tracklet::last_detected() const {
  for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
    if (it->source == EntrySource::kDetected) return *it;
  }
  throw std::logic_error("tracklet has no detected entry");
}

Boxd predict_velocity(const Tracklet& tracklet, int tau) {
  if (tracklet.entries.empty()) {
    throw std::invalid_argument("predict_velocity: empty tracklet");
  }
  const Eigen::Vector4d base = tracklet.last_detected().box.ltwh();
  const Eigen::Vector4d moved = base + tracklet.velocity * tau;
  return Boxd(moved(0), moved(1), std::max(moved(2), 1.0),
              std::max(moved(3), 1.0));
}

namespace {

void update_velocity(Tracklet& tr) {
  const TrackEntry* last = nullptr;
  const TrackEntry* prev = nullptr;
  for (auto it = tr.entries.rbegin(); it != tr.entries.rend(); ++it) {
    if (it->source != EntrySource::kDetected) continue;
    if (last == nullptr) {
      last = &*it;
    } else {
      prev = &*it;
      break;
    }
  }
  if (last == nullptr || prev == nullptr) {
    tr.velocity.setZero();
    return;
  }
  tr.velocity = (last->box.ltwh() - prev->box.ltwh()) /
                static_cast<double>(last->frame - prev->frame);
}

void fill_gap(Tracklet& tr, const TrackEntry& next) {
  const TrackEntry& from = tr.entries.back();
  const int span = next.frame - from.frame;
  if (span <= 1) return;
  const Eigen::Vector4d a = from.box.ltwh();
  const Eigen::Vector4d b = next.box.ltwh();
  for (int k = 1; k < span; ++k) {
    const Eigen::Vector4d v = a + (b - a) * (static_cast<double>(k) / span);
    tr.entries.push_back({from.frame + k, Boxd(v(0), v(1), v(2), v(3)),
                          std::min(from.score, next.score),
                          EntrySource::kInterpolated});
  }
}

Tracklet start_tracklet(int identity, int frame, const BoxPair& pair) {
  Tracklet tr;
  tr.identity = identity;
  tr.entries.push_back(
      {frame, pair.first, pair.cls_score, EntrySource::kDetected});
  tr.lookahead = pair.second;
  tr.lookahead_score = pair.cls_score;
  return tr;
}

}  // namespace

void chain_node(TrackerState& state, const Node& node,
                const TrackerParams& params) {
  const int t = node.t;

  // Candidate boxes for frame t.
  std::vector<std::size_t> owners;
  std::vector<Boxd> candidates;
  for (std::size_t i = 0; i < state.tracklets.size(); ++i) {
    const auto& tr = state.tracklets[i];
    if (tr.state == TrackletState::kActive && tr.lookahead) {
      owners.push_back(i);
      candidates.push_back(*tr.lookahead);
    } else if (tr.state == TrackletState::kRetained) {
      owners.push_back(i);
      candidates.push_back(
          predict_velocity(tr, t - tr.last_detected().frame));
    }
  }

  const auto rows = static_cast<Eigen::Index>(candidates.size());
  const auto cols = static_cast<Eigen::Index>(node.pairs.size());
  Eigen::MatrixXd cost(rows, cols);
  ForbidMask forbid(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const double overlap = iou(candidates[r], node.pairs[c].first);
      cost(r, c) = 1.0 - overlap;
      forbid(r, c) = overlap < params.iou_match_thresh;
    }
  }
  const Assignment match = km_assign(cost, forbid);

  for (Eigen::Index r = 0; r < rows; ++r) {
    Tracklet& tr = state.tracklets[owners[r]];
    const int c = match.row_to_col[r];
    if (c >= 0) {
      const BoxPair& pair = node.pairs[c];
      const TrackEntry entry{t, pair.first, pair.cls_score,
                             EntrySource::kDetected};
      if (params.fill_gaps) fill_gap(tr, entry);
      tr.entries.push_back(entry);
      tr.lookahead = pair.second;
      tr.lookahead_score = pair.cls_score;
      tr.miss_count = 0;
      tr.state = TrackletState::kActive;
      update_velocity(tr);
      continue;
    }
    if (tr.state == TrackletState::kActive) {
      // The chain breaks here, but the previous node already regressed this
      // target's box in frame t.
      tr.entries.push_back(
          {t, *tr.lookahead, tr.lookahead_score, EntrySource::kLookahead});
      tr.lookahead.reset();
      tr.miss_count = 0;
      tr.state = TrackletState::kRetained;
      continue;
    }
    ++tr.miss_count;
    if (tr.miss_count > params.sigma) tr.state = TrackletState::kTerminated;
  }

  for (Eigen::Index c = 0; c < cols; ++c) {
    if (match.col_to_row[c] >= 0) continue;
    state.tracklets.push_back(
        start_tracklet(state.next_identity++, t, node.pairs[c]));
  }
}

Node postprocess_node(const Node& node, const TrackerParams& params) {
  Node out;
  out.t = node.t;
  out.pairs = filter_confidence(soft_nms(node.pairs, params.nms_thresh),
                                params.conf_thresh);
  return out;
}

Trajectories collect_trajectories(std::span<const Tracklet> tracklets) {
  Trajectories out;
  for (const auto& tr : tracklets) {
    for (const auto& e : tr.entries) {
      out[e.frame].push_back({tr.identity, e.box, e.score});
    }
  }
  normalize(out);
  return out;
}

Trajectories run_tracker(std::span<const Node> nodes,
                         const TrackerParams& params,
                         std::optional<int> frame_count) {
  if (nodes.empty()) {
    throw std::invalid_argument("run_tracker: empty node sequence");
  }
  params.validate();

  std::vector<const Node*> ordered;
  for (const auto& n : nodes) ordered.push_back(&n);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Node* a, const Node* b) { return a->t < b->t; });
  for (std::size_t i = 1; i < ordered.size(); ++i) {
    if (ordered[i]->t == ordered[i - 1]->t) {
      throw std::invalid_argument("run_tracker: duplicate node " +
                                  std::to_string(ordered[i]->t));
    }
  }

  const int first = ordered.front()->t;
  int last = ordered.back()->t;
  if (frame_count) last = std::max(last, *frame_count - 1);

  TrackerState state;
  std::size_t next = 0;
  for (int t = first; t <= last; ++t) {
    Node current{t, {}};
    if (next < ordered.size() && ordered[next]->t == t) {
      current = postprocess_node(*ordered[next], params);
      ++next;
    }
    chain_node(state, current, params);
  }
  return collect_trajectories(state.tracklets);
}

}  // namespace chainflow
