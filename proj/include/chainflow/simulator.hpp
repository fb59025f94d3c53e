// Deterministic synthetic world standing in for annotated video and for the
// paired-box regression network, plus the box-level training augmentations.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "chainflow/chaining.hpp"
#include "chainflow/sequence.hpp"

namespace chainflow {

/// Target `target` (0-based) is absent from the ground truth for `duration`
/// frames starting at `start`.
struct Occlusion {
  int target = 0;
  int start = 0;
  int duration = 0;
};

struct WorldConfig {
  int frames = 100;
  int image_w = 1920;
  int image_h = 1080;
  int n_targets = 8;
  // Per-frame probability that a target which has not appeared yet enters.
  // Zero means every target is present from frame 0.
  double entry_prob = 0.0;
  // Per-frame probability that a present target leaves for good.
  double exit_prob = 0.0;
  std::vector<Occlusion> occlusions;
  // Speed range in pixels per frame; direction is uniform.
  double min_speed = 0.5;
  double max_speed = 4.0;
  // Standard deviation of a random-walk perturbation added to the position.
  double jitter_std = 0.0;
  double min_height = 60.0;
  double max_height = 240.0;
  double min_aspect = 2.2;  // h / w
  double max_aspect = 3.2;
  // Trajectories are resampled until no two targets overlap by more than
  // this IoU in any frame (or the attempt budget runs out).
  double max_pairwise_iou = 0.3;
  int max_attempts = 200;

  void validate() const;
};

struct NoiseConfig {
  double center_jitter_std = 0.0;
  double size_jitter_std = 0.0;
  double drop_prob = 0.0;
  // Expected number of false-positive pairs per node (Poisson).
  double false_positive_rate = 0.0;
  // Scores of true pairs follow Beta(a, b); a <= 0 pins them to 1.
  double true_score_a = 0.0;
  double true_score_b = 1.0;
  // False-positive scores are uniform on these ranges.
  double fp_cls_min = 0.0;
  double fp_cls_max = 0.6;
  double fp_id_min = 0.0;
  double fp_id_max = 0.3;

  /// Moderately noisy detections.
  static NoiseConfig typical();
  void validate() const;
};

/// Ground truth for every frame 0 .. frames-1. Identities are target index
/// plus one and persist across occlusions.
std::vector<GroundTruthFrame> gen_sequence(const WorldConfig& cfg,
                                           std::uint64_t seed);

/// One node per frame. Node t holds a pair for every target present in both
/// frame t and frame t+1; the last node pairs the final frame with a copy of
/// itself.
std::vector<Node> corrupt_to_pairs(std::span<const GroundTruthFrame> gt,
                                   const NoiseConfig& noise,
                                   std::uint64_t seed);

/// Two frame indices at most three apart, order reversed half of the time.
std::pair<int, int> sample_training_pair(int length, std::mt19937_64& rng);
std::pair<int, int> sample_training_pair(int length, std::uint64_t seed);

/// Crop / expand / flip / resize parameters, applied identically to both
/// frames of a training pair.
struct AugmentTransform {
  double crop_x = 0.0;
  double crop_y = 0.0;
  double crop_side = 1.0;
  bool expanded = false;
  double expand_factor = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;
  bool flipped = false;
  double out_size = 1.0;

  double canvas_side() const {
    return expanded ? crop_side * expand_factor : crop_side;
  }
  friend bool operator==(const AugmentTransform&,
                         const AugmentTransform&) = default;
};

inline constexpr double kCropKeepIom = 0.2;

AugmentTransform sample_augment(int image_w, int image_h, std::mt19937_64& rng);

/// Keeps boxes whose IoM with the crop exceeds 0.2, clipped to the crop, and
/// maps them through expansion, flip and resize.
GroundTruthFrame apply_augment(const AugmentTransform& transform,
                               const GroundTruthFrame& frame);

struct AugmentResult {
  GroundTruthFrame frame;
  int width = 0;
  int height = 0;
  AugmentTransform transform;
};

AugmentResult augment_crop_expand_flip(const GroundTruthFrame& frame,
                                       int image_w, int image_h,
                                       std::uint64_t seed);

}  // namespace chainflow
