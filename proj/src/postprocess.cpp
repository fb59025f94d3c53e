#include "chainflow/postprocess.hpp"

#include <algorithm>
#include <numeric>

namespace chainflow {

std::vector<BoxPair> soft_nms(std::span<const BoxPair> pairs,
                              double nms_thresh) {
  std::vector<BoxPair> pending(pairs.begin(), pairs.end());
  std::vector<BoxPair> kept;
  kept.reserve(pending.size());
  while (!pending.empty()) {
    // Highest score first; earlier input position wins ties.
    auto top = std::max_element(
        pending.begin(), pending.end(),
        [](const BoxPair& a, const BoxPair& b) {
          return a.cls_score < b.cls_score;
        });
    kept.push_back(*top);
    pending.erase(top);
    const Boxd& anchor = kept.back().first;
    for (auto& p : pending) {
      const double overlap = iou(anchor, p.first);
      if (overlap > nms_thresh) p.cls_score *= 1.0 - overlap;
    }
  }
  return kept;
}

std::vector<BoxPair> filter_confidence(std::span<const BoxPair> pairs,
                                       double conf_thresh) {
  std::vector<BoxPair> out;
  std::copy_if(pairs.begin(), pairs.end(), std::back_inserter(out),
               [conf_thresh](const BoxPair& p) {
                 return p.cls_score >= conf_thresh;
               });
  return out;
}

}  // namespace chainflow
