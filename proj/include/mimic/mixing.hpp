#pragma once

// Two-view augmentation, Beta-distributed mixing of image/label pairs, and the
// positive/negative pair mask over a multiview batch.

#include "mimic/core.hpp"
#include "mimic/random.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mimic {

enum class MixMode { mixup, cutmix, random_choice };

std::string to_string(MixMode mode);
MixMode parse_mix_mode(const std::string& s);

struct MixPolicy {
  double alpha = 2.0;
  double beta = 2.0;
  MixMode mode = MixMode::random_choice;
  bool enabled = true;

  void validate() const;
};

struct AugmentConfig {
  bool enabled = true;
  double scale_min = 0.67;
  double scale_max = 1.0;
  double ratio_min = 3.0 / 4.0;
  double ratio_max = 4.0 / 3.0;
  double flip_prob = 0.5;
  /// Brightness/contrast/saturation strength; applied to 3-channel images only.
  double color_jitter = 0.4;

  void validate() const;
};

/// Random resized crop, horizontal flip, and color jitter.
Image augment_image(const Image& img, const AugmentConfig& cfg, RandomSource& rng);

/// Two independently augmented views per input: element 2k and 2k+1 are views of input k.
MultiviewBatch augment_two_views(std::span<const LabeledSample> batch, const AugmentConfig& cfg, RandomSource& rng);

/// λ ~ Beta(α, β).
double sample_mix_coefficient(const MixPolicy& policy, RandomSource& rng);

struct Box {
  int top = 0;
  int left = 0;
  int height = 0;
  int width = 0;

  int area() const { return height * width; }
};

struct MixOutcome {
  LabeledSample sample;
  double lambda = 1.0;     // effective coefficient on `a`
  std::optional<Box> box;  // pasted region for cutmix
};

/// Mixup: λ·a + (1−λ)·b. CutMix: pastes a box of b covering ≈(1−λ) of the
/// image into a and reports the area-corrected coefficient.
MixOutcome mix_pair(const LabeledSample& a, const LabeledSample& b, double lambda, MixMode mode, RandomSource& rng);

/// Replaces every element i by a mix with a uniformly chosen partner j ≠ i,
/// drawing a fresh coefficient per element. Pass-through when disabled.
MultiviewBatch mix_multiview(const MultiviewBatch& batch, const MixPolicy& policy, RandomSource& rng);

enum class Relation : std::uint8_t { self, positive, negative };

class PairMask {
 public:
  PairMask() = default;
  PairMask(Index n, double threshold);

  Index size() const { return n_; }
  double threshold() const { return threshold_; }

  Relation operator()(Index i, Index j) const { return relation_[static_cast<std::size_t>(i * n_ + j)]; }
  void set(Index i, Index j, Relation r) { relation_[static_cast<std::size_t>(i * n_ + j)] = r; }

  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> positives() const;
  Index positive_count(Index i) const;
  Index negative_count(Index i) const;

  friend bool operator==(const PairMask&, const PairMask&) = default;

 private:
  Index n_ = 0;
  double threshold_ = 0.0;
  std::vector<Relation> relation_;
};

/// positive iff i ≠ j and label_distance(label_i, label_j) ≤ t.
PairMask build_pair_mask(std::span<const SoftLabel> labels, double threshold);
PairMask build_pair_mask(const MultiviewBatch& batch, double threshold);

}  // namespace mimic
