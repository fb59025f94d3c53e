#include "chainflow/metrics.hpp"

#include <Eigen/Core>

#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include "chainflow/assignment.hpp"

namespace chainflow {

namespace {

void check_range(const Trajectories& seq, const FrameRange& range,
                 const char* what) {
  if (seq.empty()) return;
  if (seq.begin()->first < range.first || seq.rbegin()->first > range.last) {
    throw std::invalid_argument(
        std::string(what) + " frames [" + std::to_string(seq.begin()->first) +
        ", " + std::to_string(seq.rbegin()->first) +
        "] fall outside the evaluated range [" + std::to_string(range.first) +
        ", " + std::to_string(range.last) + "]");
  }
}

void check_inputs(const Trajectories& gt, const Trajectories& hyp,
                  double iou_thresh, const std::optional<FrameRange>& range) {
  if (!(iou_thresh >= 0.0 && iou_thresh <= 1.0)) {
    throw std::invalid_argument("iou threshold must lie in [0, 1]");
  }
  if (range) {
    check_range(gt, *range, "ground-truth");
    check_range(hyp, *range, "hypothesis");
  }
}

const std::vector<TrackedBox>& row_or_empty(const Trajectories& seq,
                                            int frame) {
  static const std::vector<TrackedBox> kEmpty;
  const auto it = seq.find(frame);
  return it == seq.end() ? kEmpty : it->second;
}

struct ClearTrace {
  ClearCounts counts;
  std::map<int, long> gt_frames;    // gt identity -> frames present
  std::map<int, long> gt_matched;   // gt identity -> frames matched
};

ClearTrace run_clear(const Trajectories& gt, const Trajectories& hyp,
                     double iou_thresh) {
  ClearTrace trace;
  auto& counts = trace.counts;
  std::unordered_map<int, int> last_match;  // gt id -> hyp id

  std::set<int> frames;
  for (const auto& [f, row] : gt) frames.insert(f);
  for (const auto& [f, row] : hyp) frames.insert(f);

  for (int f : frames) {
    const auto& g = row_or_empty(gt, f);
    const auto& h = row_or_empty(hyp, f);
    counts.gt_count += static_cast<long>(g.size());
    for (const auto& b : g) ++trace.gt_frames[b.identity];

    const auto n_g = static_cast<Eigen::Index>(g.size());
    const auto n_h = static_cast<Eigen::Index>(h.size());
    Eigen::MatrixXd overlap(n_g, n_h);
    for (Eigen::Index i = 0; i < n_g; ++i) {
      for (Eigen::Index j = 0; j < n_h; ++j) {
        overlap(i, j) = iou(g[i].box, h[j].box);
      }
    }

    std::vector<int> g_to_h(g.size(), -1);
    std::vector<bool> h_used(h.size(), false);

    // Keep last correspondences that are still valid.
    for (Eigen::Index i = 0; i < n_g; ++i) {
      const auto it = last_match.find(g[i].identity);
      if (it == last_match.end()) continue;
      for (Eigen::Index j = 0; j < n_h; ++j) {
        if (h[j].identity == it->second && !h_used[j] &&
            overlap(i, j) >= iou_thresh) {
          g_to_h[i] = static_cast<int>(j);
          h_used[j] = true;
          break;
        }
      }
    }

    // Match the rest.
    std::vector<Eigen::Index> free_g, free_h;
    for (Eigen::Index i = 0; i < n_g; ++i) {
      if (g_to_h[i] < 0) free_g.push_back(i);
    }
    for (Eigen::Index j = 0; j < n_h; ++j) {
      if (!h_used[j]) free_h.push_back(j);
    }
    const auto rows = static_cast<Eigen::Index>(free_g.size());
    const auto cols = static_cast<Eigen::Index>(free_h.size());
    Eigen::MatrixXd cost(rows, cols);
    ForbidMask forbid(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c) {
        const double o = overlap(free_g[r], free_h[c]);
        cost(r, c) = 1.0 - o;
        forbid(r, c) = o < iou_thresh;
      }
    }
    const Assignment fresh = km_assign(cost, forbid);
    for (Eigen::Index r = 0; r < rows; ++r) {
      const int c = fresh.row_to_col[r];
      if (c < 0) continue;
      const Eigen::Index i = free_g[r];
      const Eigen::Index j = free_h[c];
      g_to_h[i] = static_cast<int>(j);
      h_used[j] = true;
      const auto it = last_match.find(g[i].identity);
      if (it != last_match.end() && it->second != h[j].identity) ++counts.ids;
    }

    for (Eigen::Index i = 0; i < n_g; ++i) {
      if (g_to_h[i] < 0) {
        ++counts.fn;
        continue;
      }
      const int j = g_to_h[i];
      ++counts.matches;
      counts.iou_sum += overlap(i, j);
      last_match[g[i].identity] = h[j].identity;
      ++trace.gt_matched[g[i].identity];
    }
    for (Eigen::Index j = 0; j < n_h; ++j) {
      if (!h_used[j]) ++counts.fp;
    }
  }

  counts.mota =
      mota_from_counts(counts.fp, counts.fn, counts.ids, counts.gt_count);
  counts.motp = counts.matches > 0
                    ? 100.0 * counts.iou_sum / static_cast<double>(counts.matches)
                    : 0.0;
  return trace;
}

}  // namespace

double mota_from_counts(long fp, long fn, long ids, long gt_count) {
  if (gt_count <= 0) return (fp + fn + ids) == 0 ? 100.0 : 0.0;
  return 100.0 * (1.0 - static_cast<double>(fp + fn + ids) /
                            static_cast<double>(gt_count));
}

ClearCounts clear_mot(const Trajectories& gt, const Trajectories& hyp,
                      double iou_thresh, std::optional<FrameRange> range) {
  check_inputs(gt, hyp, iou_thresh, range);
  return run_clear(gt, hyp, iou_thresh).counts;
}

IdentityScore idf1(const Trajectories& gt, const Trajectories& hyp,
                   double iou_thresh, std::optional<FrameRange> range) {
  check_inputs(gt, hyp, iou_thresh, range);

  std::map<int, Eigen::Index> gt_index, hyp_index;
  std::vector<long> gt_len, hyp_len;
  for (const auto& [f, row] : gt) {
    for (const auto& b : row) {
      auto [it, fresh] = gt_index.emplace(b.identity, gt_len.size());
      if (fresh) gt_len.push_back(0);
      ++gt_len[it->second];
    }
  }
  for (const auto& [f, row] : hyp) {
    for (const auto& b : row) {
      auto [it, fresh] = hyp_index.emplace(b.identity, hyp_len.size());
      if (fresh) hyp_len.push_back(0);
      ++hyp_len[it->second];
    }
  }

  // overlap(g, h): frames where both are present and overlap enough.
  Eigen::MatrixXd overlap = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(gt_len.size()),
      static_cast<Eigen::Index>(hyp_len.size()));
  for (const auto& [f, g_row] : gt) {
    const auto& h_row = row_or_empty(hyp, f);
    for (const auto& g : g_row) {
      for (const auto& h : h_row) {
        if (iou(g.box, h.box) >= iou_thresh) {
          overlap(gt_index[g.identity], hyp_index[h.identity]) += 1.0;
        }
      }
    }
  }

  long total_gt = 0, total_hyp = 0;
  for (long n : gt_len) total_gt += n;
  for (long n : hyp_len) total_hyp += n;

  // Minimizing IDFN + IDFP over identity matchings is the same as maximizing
  // the matched overlap; pairs without overlap add nothing either way.
  IdentityScore score;
  if (overlap.size() > 0) {
    const Assignment match = km_assign((-overlap).eval());
    for (Eigen::Index g = 0; g < overlap.rows(); ++g) {
      const int h = match.row_to_col[g];
      if (h >= 0) score.idtp += static_cast<long>(overlap(g, h));
    }
  }
  score.idfn = total_gt - score.idtp;
  score.idfp = total_hyp - score.idtp;
  const long denom = 2 * score.idtp + score.idfp + score.idfn;
  score.idf1 = denom == 0 ? 100.0
                          : 100.0 * 2.0 * static_cast<double>(score.idtp) /
                                static_cast<double>(denom);
  return score;
}

Coverage mt_ml(const Trajectories& gt, const Trajectories& hyp,
               double iou_thresh, std::optional<FrameRange> range) {
  check_inputs(gt, hyp, iou_thresh, range);
  const ClearTrace trace = run_clear(gt, hyp, iou_thresh);
  Coverage out;
  for (const auto& [id, frames] : trace.gt_frames) {
    const auto it = trace.gt_matched.find(id);
    const long matched = it == trace.gt_matched.end() ? 0 : it->second;
    const double ratio =
        static_cast<double>(matched) / static_cast<double>(frames);
    ++out.tracks;
    if (ratio >= 0.8) ++out.mostly_tracked;
    if (ratio <= 0.2) ++out.mostly_lost;
  }
  if (out.tracks > 0) {
    out.mt = 100.0 * static_cast<double>(out.mostly_tracked) /
             static_cast<double>(out.tracks);
    out.ml = 100.0 * static_cast<double>(out.mostly_lost) /
             static_cast<double>(out.tracks);
  }
  return out;
}

ClearReport evaluate(const std::string& name, const Trajectories& gt,
                     const Trajectories& hyp, double iou_thresh,
                     std::optional<FrameRange> range) {
  const ClearCounts c = clear_mot(gt, hyp, iou_thresh, range);
  const IdentityScore id = idf1(gt, hyp, iou_thresh, range);
  const Coverage cov = mt_ml(gt, hyp, iou_thresh, range);
  ClearReport r;
  r.name = name;
  r.mota = c.mota;
  r.motp = c.motp;
  r.idf1 = id.idf1;
  r.mt = cov.mt;
  r.ml = cov.ml;
  r.fp = c.fp;
  r.fn = c.fn;
  r.ids = c.ids;
  r.gt_count = c.gt_count;
  r.matches = c.matches;
  r.gt_tracks = cov.tracks;
  r.mostly_tracked = cov.mostly_tracked;
  r.mostly_lost = cov.mostly_lost;
  return r;
}

ClearReport aggregate(std::span<const ClearReport> reports,
                      const std::string& name) {
  if (reports.empty()) {
    throw std::invalid_argument("aggregate: no reports");
  }
  ClearReport total;
  total.name = name;
  double motp_weighted = 0.0;
  double idf1_weighted = 0.0;
  long idf1_weight = 0;
  for (const auto& r : reports) {
    total.fp += r.fp;
    total.fn += r.fn;
    total.ids += r.ids;
    total.gt_count += r.gt_count;
    total.matches += r.matches;
    total.gt_tracks += r.gt_tracks;
    total.mostly_tracked += r.mostly_tracked;
    total.mostly_lost += r.mostly_lost;
    motp_weighted += r.motp * static_cast<double>(r.matches);
    const long w = r.gt_count + r.hyp_count();
    idf1_weighted += r.idf1 * static_cast<double>(w);
    idf1_weight += w;
  }
  total.mota =
      mota_from_counts(total.fp, total.fn, total.ids, total.gt_count);
  total.motp = total.matches > 0
                   ? motp_weighted / static_cast<double>(total.matches)
                   : 0.0;
  total.idf1 = idf1_weight > 0
                   ? idf1_weighted / static_cast<double>(idf1_weight)
                   : 100.0;
  if (total.gt_tracks > 0) {
    total.mt = 100.0 * static_cast<double>(total.mostly_tracked) /
               static_cast<double>(total.gt_tracks);
    total.ml = 100.0 * static_cast<double>(total.mostly_lost) /
               static_cast<double>(total.gt_tracks);
  }
  return total;
}

}  // namespace chainflow
