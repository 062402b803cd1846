#include "mimic/mixing.hpp"

#include <algorithm>
#include <cmath>

namespace mimic {

std::string to_string(MixMode mode) {
  switch (mode) {
    case MixMode::mixup: return "mixup";
    case MixMode::cutmix: return "cutmix";
    case MixMode::random_choice: return "random_choice";
  }
  return "random_choice";
}

MixMode parse_mix_mode(const std::string& s) {
  if (s == "mixup") return MixMode::mixup;
  if (s == "cutmix") return MixMode::cutmix;
  if (s == "random_choice") return MixMode::random_choice;
  throw ConfigError("unknown mix mode '" + s + "' (expected mixup, cutmix or random_choice)");
}

void MixPolicy::validate() const {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw ConfigError("mix policy: alpha and beta must be > 0");
}

void AugmentConfig::validate() const {
  if (!(scale_min > 0.0 && scale_min <= scale_max && scale_max <= 1.0)) {
    throw ConfigError("augment: need 0 < scale_min <= scale_max <= 1");
  }
  if (!(ratio_min > 0.0 && ratio_min <= ratio_max)) throw ConfigError("augment: need 0 < ratio_min <= ratio_max");
  if (flip_prob < 0.0 || flip_prob > 1.0) throw ConfigError("augment: flip_prob must lie in [0, 1]");
  if (color_jitter < 0.0 || color_jitter >= 1.0) throw ConfigError("augment: color_jitter must lie in [0, 1)");
}

namespace {

float bilinear(const Image& img, double y, double x, int c) {
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  const int y0 = static_cast<int>(std::floor(y));
  const int x0 = static_cast<int>(std::floor(x));
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const double fy = y - y0;
  const double fx = x - x0;
  const double top = (1 - fx) * img.at(y0, x0, c) + fx * img.at(y0, x1, c);
  const double bottom = (1 - fx) * img.at(y1, x0, c) + fx * img.at(y1, x1, c);
  return static_cast<float>((1 - fy) * top + fy * bottom);
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

void color_jitter(Image& img, double strength, RandomSource& rng) {
  const double brightness = rng.uniform(1.0 - strength, 1.0 + strength);
  const double contrast = rng.uniform(1.0 - strength, 1.0 + strength);
  const double saturation = rng.uniform(1.0 - strength, 1.0 + strength);
  auto data = img.data();
  for (float& v : data) v = clamp01(v * brightness);

  double mean_gray = 0.0;
  const std::size_t pixels = static_cast<std::size_t>(img.height()) * img.width();
  std::vector<double> gray(pixels);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double g = 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
      gray[static_cast<std::size_t>(y) * img.width() + x] = g;
      mean_gray += g;
    }
  }
  mean_gray /= static_cast<double>(pixels);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double g = gray[static_cast<std::size_t>(y) * img.width() + x];
      for (int c = 0; c < img.channels(); ++c) {
        double v = contrast * (img.at(y, x, c) - mean_gray) + mean_gray;
        v = saturation * (v - g) + g;
        img.at(y, x, c) = clamp01(v);
      }
    }
  }
}

}  // namespace

Image augment_image(const Image& img, const AugmentConfig& cfg, RandomSource& rng) {
  if (!cfg.enabled) return img;
  const int h = img.height();
  const int w = img.width();
  const double area = static_cast<double>(h) * w;
  const double scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  const double log_ratio = rng.uniform(std::log(cfg.ratio_min), std::log(cfg.ratio_max));
  const double ratio = std::exp(log_ratio);
  const double crop_w = std::min(static_cast<double>(w), std::sqrt(scale * area * ratio));
  const double crop_h = std::min(static_cast<double>(h), std::sqrt(scale * area / ratio));
  const double top = rng.uniform() * (h - crop_h);
  const double left = rng.uniform() * (w - crop_w);
  const bool flip = rng.bernoulli(cfg.flip_prob);

  Image out(h, w, img.channels());
  for (int y = 0; y < h; ++y) {
    const double sy = top + (y + 0.5) * crop_h / h - 0.5;
    for (int x = 0; x < w; ++x) {
      const int dst_x = flip ? w - 1 - x : x;
      const double sx = left + (x + 0.5) * crop_w / w - 0.5;
      for (int c = 0; c < img.channels(); ++c) out.at(y, dst_x, c) = bilinear(img, sy, sx, c);
    }
  }
  if (img.channels() >= 3 && cfg.color_jitter > 0.0) color_jitter(out, cfg.color_jitter, rng);
  return out;
}

MultiviewBatch augment_two_views(std::span<const LabeledSample> batch, const AugmentConfig& cfg, RandomSource& rng) {
  expects(batch.size() >= 2, "augment_two_views: need at least 2 inputs for contrastive pairs");
  MultiviewBatch out;
  out.input_count = batch.size();
  out.samples.reserve(2 * batch.size());
  out.provenance.reserve(2 * batch.size());
  for (std::size_t k = 0; k < batch.size(); ++k) {
    for (int view = 0; view < 2; ++view) {
      out.samples.push_back({augment_image(batch[k].image, cfg, rng), batch[k].label, batch[k].source_id});
      out.provenance.push_back({.view_of = k, .mix_partner = std::nullopt, .mix_coefficient = std::nullopt, .view_label = batch[k].label});
    }
  }
  return out;
}

double sample_mix_coefficient(const MixPolicy& policy, RandomSource& rng) {
  policy.validate();
  return rng.beta(policy.alpha, policy.beta);
}

MixOutcome mix_pair(const LabeledSample& a, const LabeledSample& b, double lambda, MixMode mode, RandomSource& rng) {
  const Image& ia = a.image;
  const Image& ib = b.image;
  expects(ia.height() == ib.height() && ia.width() == ib.width() && ia.channels() == ib.channels(),
          "mix_pair: image shapes differ");
  expects(a.label.num_classes() == b.label.num_classes(), "mix_pair: label lengths differ");
  expects(lambda >= 0.0 && lambda <= 1.0, "mix_pair: lambda must lie in [0, 1]");
  if (mode == MixMode::random_choice) mode = rng.bernoulli(0.5) ? MixMode::mixup : MixMode::cutmix;

  MixOutcome out;
  out.sample.source_id = a.source_id + "+" + b.source_id;
  if (mode == MixMode::mixup) {
    std::vector<float> data(ia.size());
    const auto da = ia.data();
    const auto db = ib.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = clamp01(lambda * da[i] + (1.0 - lambda) * db[i]);
    out.sample.image = Image(ia.height(), ia.width(), ia.channels(), std::move(data));
    out.lambda = lambda;
  } else {
    const double cut = std::sqrt(1.0 - lambda);
    Box box;
    box.height = static_cast<int>(std::lround(ia.height() * cut));
    box.width = static_cast<int>(std::lround(ia.width() * cut));
    box.top = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ia.height() - box.height + 1)));
    box.left = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(ia.width() - box.width + 1)));
    out.sample.image = ia;
    for (int y = box.top; y < box.top + box.height; ++y)
      for (int x = box.left; x < box.left + box.width; ++x)
        for (int c = 0; c < ia.channels(); ++c) out.sample.image.at(y, x, c) = ib.at(y, x, c);
    out.lambda = 1.0 - static_cast<double>(box.area()) / (static_cast<double>(ia.height()) * ia.width());
    out.box = box;
  }
  out.sample.label = SoftLabel::mix(a.label, b.label, out.lambda);
  return out;
}

MultiviewBatch mix_multiview(const MultiviewBatch& batch, const MixPolicy& policy, RandomSource& rng) {
  if (!policy.enabled) return batch;
  policy.validate();
  expects(!batch.mixed(), "mix_multiview: batch is already mixed");
  const std::size_t n = batch.size();
  expects(n >= 2, "mix_multiview: need at least 2 elements");
  MultiviewBatch out = batch;
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_int(n - 1));
    if (j >= i) ++j;
    const double lambda = sample_mix_coefficient(policy, rng);
    MixOutcome mixed = mix_pair(batch.samples[i], batch.samples[j], lambda, policy.mode, rng);
    out.samples[i] = std::move(mixed.sample);
    out.provenance[i].mix_partner = j;
    out.provenance[i].mix_coefficient = mixed.lambda;
  }
  return out;
}

PairMask::PairMask(Index n, double threshold)
    : n_(n), threshold_(threshold), relation_(static_cast<std::size_t>(n * n), Relation::negative) {
  for (Index i = 0; i < n; ++i) set(i, i, Relation::self);
}

Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> PairMask::positives() const {
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> out(n_, n_);
  for (Index i = 0; i < n_; ++i)
    for (Index j = 0; j < n_; ++j) out(i, j) = (*this)(i, j) == Relation::positive;
  return out;
}

Index PairMask::positive_count(Index i) const {
  Index c = 0;
  for (Index j = 0; j < n_; ++j) c += (*this)(i, j) == Relation::positive;
  return c;
}

Index PairMask::negative_count(Index i) const {
  Index c = 0;
  for (Index j = 0; j < n_; ++j) c += (*this)(i, j) == Relation::negative;
  return c;
}

PairMask build_pair_mask(std::span<const SoftLabel> labels, double threshold) {
  expects(threshold >= 0.0 && threshold <= 1.0, "build_pair_mask: threshold must lie in [0, 1]");
  const auto n = static_cast<Index>(labels.size());
  PairMask mask(n, threshold);
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) {
      const bool positive = label_distance(labels[i], labels[j]) <= threshold;
      const Relation r = positive ? Relation::positive : Relation::negative;
      mask.set(i, j, r);
      mask.set(j, i, r);
    }
  }
  return mask;
}

PairMask build_pair_mask(const MultiviewBatch& batch, double threshold) {
  const std::vector<SoftLabel> labels = batch.labels();
  return build_pair_mask(labels, threshold);
}

}  // namespace mimic
