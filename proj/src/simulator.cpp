#include "chainflow/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>

namespace chainflow {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t a,
                            std::uint64_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b)};
  return std::mt19937_64(seq);
}

bool probability(double p) { return p >= 0.0 && p <= 1.0; }

// Visible box of one target per frame, before occlusions are applied.
using Path = std::vector<std::optional<Boxd>>;

Path sample_path(const WorldConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

  int start = 0;
  if (cfg.entry_prob > 0.0) {
    while (start < cfg.frames && !(unit(rng) < cfg.entry_prob)) ++start;
  }

  const double h = std::min(uniform(cfg.min_height, cfg.max_height),
                            0.9 * cfg.image_h);
  const double w = std::min(h / uniform(cfg.min_aspect, cfg.max_aspect),
                            0.9 * cfg.image_w);
  double x = uniform(0.0, cfg.image_w - w);
  double y = uniform(0.0, cfg.image_h - h);
  const double speed = uniform(cfg.min_speed, cfg.max_speed);
  const double heading = uniform(0.0, 2.0 * kPi);
  const double vx = speed * std::cos(heading);
  const double vy = speed * std::sin(heading);
  std::normal_distribution<double> jitter(0.0, 1.0);

  const Boxd image(0.0, 0.0, cfg.image_w, cfg.image_h);
  Path path(cfg.frames);
  for (int f = start; f < cfg.frames; ++f) {
    if (f > start) {
      if (cfg.exit_prob > 0.0 && unit(rng) < cfg.exit_prob) break;
      x += vx;
      y += vy;
      if (cfg.jitter_std > 0.0) {
        x += cfg.jitter_std * jitter(rng);
        y += cfg.jitter_std * jitter(rng);
      }
    }
    const auto visible = clip_to(Boxd(x, y, w, h), image);
    // Leaves once less than a pixel of it remains inside the image.
    if (!visible || visible->w() < 1.0 || visible->h() < 1.0) break;
    path[f] = *visible;
  }
  return path;
}

double worst_overlap(const Path& candidate, const std::vector<Path>& others) {
  double worst = 0.0;
  for (const auto& other : others) {
    for (std::size_t f = 0; f < candidate.size(); ++f) {
      if (candidate[f] && other[f]) {
        worst = std::max(worst, iou(*candidate[f], *other[f]));
      }
    }
  }
  return worst;
}

double beta_sample(double a, double b, std::mt19937_64& rng) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x + y > 0.0 ? x / (x + y) : 0.5;
}

Boxd jittered(const Boxd& box, const NoiseConfig& noise, std::mt19937_64& rng) {
  if (noise.center_jitter_std <= 0.0 && noise.size_jitter_std <= 0.0) {
    return box;
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double cx = box.cx() + noise.center_jitter_std * gauss(rng);
  const double cy = box.cy() + noise.center_jitter_std * gauss(rng);
  const double w = std::max(1.0, box.w() + noise.size_jitter_std * gauss(rng));
  const double h = std::max(1.0, box.h() + noise.size_jitter_std * gauss(rng));
  return Boxd::FromCenter(cx, cy, w, h);
}

}  // namespace

void WorldConfig::validate() const {
  if (frames <= 0 || image_w <= 0 || image_h <= 0) {
    throw std::invalid_argument("world: frames and image size must be > 0");
  }
  if (n_targets < 0) throw std::invalid_argument("world: n_targets < 0");
  if (!probability(entry_prob) || !probability(exit_prob)) {
    throw std::invalid_argument("world: probabilities must lie in [0, 1]");
  }
  if (min_speed < 0 || max_speed < min_speed || jitter_std < 0 ||
      min_height <= 0 || max_height < min_height || min_aspect <= 0 ||
      max_aspect < min_aspect) {
    throw std::invalid_argument("world: inconsistent motion/size ranges");
  }
  for (const auto& o : occlusions) {
    if (o.duration < 0 || o.start < 0 || o.target < 0) {
      throw std::invalid_argument("world: occlusion fields must be >= 0");
    }
  }
}

NoiseConfig NoiseConfig::typical() {
  NoiseConfig n;
  n.center_jitter_std = 1.5;
  n.size_jitter_std = 1.0;
  n.drop_prob = 0.05;
  n.false_positive_rate = 0.5;
  n.true_score_a = 8.0;
  n.true_score_b = 1.5;
  return n;
}

void NoiseConfig::validate() const {
  if (center_jitter_std < 0 || size_jitter_std < 0 || !probability(drop_prob) ||
      false_positive_rate < 0) {
    throw std::invalid_argument("noise: stds and rates must be >= 0");
  }
  if (true_score_a > 0 && !(true_score_b > 0)) {
    throw std::invalid_argument("noise: Beta parameters must be positive");
  }
  if (!(probability(fp_cls_min) && probability(fp_cls_max) &&
        probability(fp_id_min) && probability(fp_id_max)) ||
      fp_cls_max < fp_cls_min || fp_id_max < fp_id_min) {
    throw std::invalid_argument("noise: score ranges must lie in [0, 1]");
  }
}

std::vector<GroundTruthFrame> gen_sequence(const WorldConfig& cfg,
                                           std::uint64_t seed) {
  cfg.validate();
  std::vector<Path> paths;
  for (int target = 0; target < cfg.n_targets; ++target) {
    std::optional<Path> best;
    double best_overlap = 2.0;
    for (int attempt = 0; attempt < std::max(cfg.max_attempts, 1); ++attempt) {
      auto rng = derived_rng(seed, static_cast<std::uint64_t>(target),
                             static_cast<std::uint64_t>(attempt));
      Path path = sample_path(cfg, rng);
      const double overlap = worst_overlap(path, paths);
      if (overlap < best_overlap) {
        best_overlap = overlap;
        best = std::move(path);
      }
      if (best_overlap <= cfg.max_pairwise_iou) break;
    }
    paths.push_back(std::move(*best));
  }

  for (const auto& o : cfg.occlusions) {
    if (o.target >= cfg.n_targets) continue;
    for (int f = o.start; f < std::min(o.start + o.duration, cfg.frames); ++f) {
      paths[o.target][f].reset();
    }
  }

  std::vector<GroundTruthFrame> frames(cfg.frames);
  for (int f = 0; f < cfg.frames; ++f) {
    frames[f].frame = f;
    for (int target = 0; target < cfg.n_targets; ++target) {
      if (paths[target][f]) frames[f].add(*paths[target][f], target + 1, 1.0);
    }
  }
  return frames;
}

std::vector<Node> corrupt_to_pairs(std::span<const GroundTruthFrame> gt,
                                   const NoiseConfig& noise,
                                   std::uint64_t seed) {
  noise.validate();
  std::vector<Node> nodes;
  nodes.reserve(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const GroundTruthFrame& cur = gt[i];
    const GroundTruthFrame& nxt = i + 1 < gt.size() ? gt[i + 1] : gt[i];
    auto rng = derived_rng(seed, static_cast<std::uint64_t>(cur.frame), 1);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::map<int, std::size_t> next_by_id;
    for (std::size_t k = 0; k < nxt.size(); ++k) {
      next_by_id.emplace(nxt.identities[k], k);
    }

    Node node;
    node.t = cur.frame;
    for (std::size_t j = 0; j < cur.size(); ++j) {
      const auto it = next_by_id.find(cur.identities[j]);
      if (it == next_by_id.end()) continue;
      const bool dropped = noise.drop_prob > 0.0 && unit(rng) < noise.drop_prob;
      BoxPair pair{jittered(cur.boxes[j], noise, rng),
                   jittered(nxt.boxes[it->second], noise, rng), 1.0, 1.0};
      if (noise.true_score_a > 0.0) {
        pair.cls_score = beta_sample(noise.true_score_a, noise.true_score_b, rng);
        pair.id_score = beta_sample(noise.true_score_a, noise.true_score_b, rng);
      }
      if (!dropped) node.pairs.push_back(pair);
    }

    if (noise.false_positive_rate > 0.0 && !cur.empty()) {
      // False positives live inside the extent of the annotated boxes.
      double max_x = 0.0, max_y = 0.0;
      for (const auto& b : cur.boxes) {
        max_x = std::max(max_x, b.right());
        max_y = std::max(max_y, b.bottom());
      }
      std::poisson_distribution<int> count(noise.false_positive_rate);
      const int n_fp = count(rng);
      for (int k = 0; k < n_fp; ++k) {
        const double h = 40.0 + 160.0 * unit(rng);
        const double w = h / (2.0 + unit(rng));
        const Boxd first(unit(rng) * std::max(max_x - w, 1.0),
                         unit(rng) * std::max(max_y - h, 1.0), w, h);
        BoxPair fp{first, jittered(first, noise, rng), 0.0, 0.0};
        fp.cls_score =
            noise.fp_cls_min + (noise.fp_cls_max - noise.fp_cls_min) * unit(rng);
        fp.id_score =
            noise.fp_id_min + (noise.fp_id_max - noise.fp_id_min) * unit(rng);
        node.pairs.push_back(fp);
      }
    }
    nodes.push_back(std::move(node));
  }
  return nodes;
}

std::pair<int, int> sample_training_pair(int length, std::mt19937_64& rng) {
  if (length < 2) {
    throw std::invalid_argument("sample_training_pair: need at least 2 frames");
  }
  const int max_gap = std::min(3, length - 1);
  std::uniform_int_distribution<int> gap_dist(1, max_gap);
  const int gap = gap_dist(rng);
  std::uniform_int_distribution<int> start(0, length - 1 - gap);
  const int a = start(rng);
  std::bernoulli_distribution reverse(0.5);
  if (reverse(rng)) return {a + gap, a};
  return {a, a + gap};
}

std::pair<int, int> sample_training_pair(int length, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_training_pair(length, rng);
}

AugmentTransform sample_augment(int image_w, int image_h,
                                std::mt19937_64& rng) {
  if (image_w <= 0 || image_h <= 0) {
    throw std::invalid_argument("augment: image size must be > 0");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double shorter = std::min(image_w, image_h);

  AugmentTransform t;
  t.crop_side = shorter * (0.3 + 0.5 * unit(rng));
  t.crop_x = (image_w - t.crop_side) * unit(rng);
  t.crop_y = (image_h - t.crop_side) * unit(rng);
  t.expanded = unit(rng) < 0.2;
  if (t.expanded) {
    t.expand_factor = 1.0 + 2.0 * unit(rng);
    const double slack = t.crop_side * (t.expand_factor - 1.0);
    t.pad_x = slack * unit(rng);
    t.pad_y = slack * unit(rng);
  }
  t.flipped = unit(rng) < 0.5;
  t.out_size = std::max(1.0, std::floor(shorter / 2.0));
  return t;
}

GroundTruthFrame apply_augment(const AugmentTransform& t,
                               const GroundTruthFrame& frame) {
  const Boxd crop(t.crop_x, t.crop_y, t.crop_side, t.crop_side);
  const double canvas = t.canvas_side();
  const double scale = t.out_size / canvas;
  GroundTruthFrame out;
  out.frame = frame.frame;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    if (!(iom(frame.boxes[i], crop) > kCropKeepIom)) continue;
    const auto clipped = clip_to(frame.boxes[i], crop);
    if (!clipped) continue;
    double x = clipped->x() - t.crop_x + t.pad_x;
    const double y = clipped->y() - t.crop_y + t.pad_y;
    if (t.flipped) x = canvas - x - clipped->w();
    out.add(Boxd(x * scale, y * scale, clipped->w() * scale,
                 clipped->h() * scale),
            frame.identities[i], frame.visibilities[i]);
  }
  return out;
}

AugmentResult augment_crop_expand_flip(const GroundTruthFrame& frame,
                                       int image_w, int image_h,
                                       std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AugmentResult result;
  result.transform = sample_augment(image_w, image_h, rng);
  result.frame = apply_augment(result.transform, frame);
  result.width = static_cast<int>(result.transform.out_size);
  result.height = result.width;
  return result;
}

}  // namespace chainflow
