#include "mimic/core.hpp"

#include <cmath>
#include <sstream>

namespace mimic {

Image::Image(int height, int width, int channels)
    : Image(height, width, channels,
            std::vector<float>(static_cast<std::size_t>(height) * width * channels, 0.0f)) {}

Image::Image(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
  expects(height > 0 && width > 0 && channels > 0, "image dimensions must be positive");
  expects(data_.size() == static_cast<std::size_t>(height) * width * channels,
          "image data length does not match H*W*C");
}

void Image::validate() const {
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const float v = data_[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      std::ostringstream msg;
      msg << "image value at flat index " << i << " is " << v << ", outside [0, 1]";
      throw ValidationError(msg.str());
    }
  }
}

SoftLabel validate_soft_label(std::span<const double> values) {
  expects(!values.empty(), "soft label must have at least one entry");
  double sum = 0.0;
  for (std::size_t k = 0; k < values.size(); ++k) {
    if (!std::isfinite(values[k]) || values[k] < 0.0) {
      std::ostringstream msg;
      msg << "soft label entry " << k << " is " << values[k] << " (must be finite and >= 0)";
      throw ValidationError(msg.str());
    }
    sum += values[k];
  }
  if (std::abs(sum - 1.0) > kLabelTolerance) {
    std::ostringstream msg;
    msg << "soft label entries sum to " << sum << ", expected 1";
    throw ValidationError(msg.str());
  }
  return SoftLabel(Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Index>(values.size())));
}

SoftLabel SoftLabel::one_hot(int cls, int num_classes) {
  expects(num_classes > 0 && cls >= 0 && cls < num_classes, "one-hot class index out of range");
  Eigen::VectorXd p = Eigen::VectorXd::Zero(num_classes);
  p[cls] = 1.0;
  return SoftLabel(std::move(p));
}

SoftLabel SoftLabel::mix(const SoftLabel& a, const SoftLabel& b, double lambda) {
  expects(a.num_classes() == b.num_classes(), "cannot mix labels of different lengths");
  expects(lambda >= 0.0 && lambda <= 1.0, "mix coefficient must lie in [0, 1]");
  return SoftLabel(lambda * a.probs_ + (1.0 - lambda) * b.probs_);
}

bool SoftLabel::is_one_hot() const {
  int ones = 0;
  for (Index k = 0; k < probs_.size(); ++k) {
    if (probs_[k] == 1.0) {
      ++ones;
    } else if (probs_[k] != 0.0) {
      return false;
    }
  }
  return ones == 1;
}

int SoftLabel::argmax() const {
  Index best = 0;
  probs_.maxCoeff(&best);
  return static_cast<int>(best);
}

double label_distance(const SoftLabel& a, const SoftLabel& b) {
  if (a.num_classes() != b.num_classes()) {
    throw ContractViolation("label_distance: length mismatch (" + std::to_string(a.num_classes()) +
                            " vs " + std::to_string(b.num_classes()) + ")");
  }
  double sum = 0.0;
  for (int k = 0; k < a.num_classes(); ++k) sum += std::abs(a[k] - b[k]);
  return 0.5 * sum;
}

bool MultiviewBatch::mixed() const {
  for (const auto& p : provenance) {
    if (p.mix_partner) return true;
  }
  return false;
}

std::vector<SoftLabel> MultiviewBatch::labels() const {
  std::vector<SoftLabel> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

SoftLabel reconstruct_label(const MultiviewBatch& batch, std::size_t i) {
  const Provenance& p = batch.provenance.at(i);
  if (!p.mix_partner) return p.view_label;
  return SoftLabel::mix(p.view_label, batch.provenance.at(*p.mix_partner).view_label,
                        *p.mix_coefficient);
}

void check_invariants(const MultiviewBatch& batch) {
  if (batch.samples.size() != 2 * batch.input_count || batch.provenance.size() != batch.samples.size()) {
    throw ValidationError("multiview batch must hold exactly 2B samples with one provenance record each");
  }
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Provenance& p = batch.provenance[i];
    const SoftLabel& label = batch.samples[i].label;
    if (p.view_of >= batch.input_count) {
      throw ValidationError("element " + std::to_string(i) + ": view_of out of range");
    }
    if (p.mix_partner.has_value() != p.mix_coefficient.has_value()) {
      throw ValidationError("element " + std::to_string(i) + ": mix partner and coefficient must come together");
    }
    if (!p.mix_partner) {
      if (!label.is_one_hot() || !(label == p.view_label)) {
        throw ValidationError("element " + std::to_string(i) + ": unmixed element must carry its one-hot view label");
      }
      continue;
    }
    if (*p.mix_partner >= batch.size() || *p.mix_partner == i) {
      throw ValidationError("element " + std::to_string(i) + ": invalid mix partner");
    }
    if (*p.mix_coefficient < 0.0 || *p.mix_coefficient > 1.0) {
      throw ValidationError("element " + std::to_string(i) + ": mix coefficient outside [0, 1]");
    }
    const SoftLabel expected = reconstruct_label(batch, i);
    if ((expected.probs() - label.probs()).cwiseAbs().maxCoeff() > kLabelTolerance) {
      throw ValidationError("element " + std::to_string(i) + ": mixed label disagrees with provenance");
    }
  }
}

std::vector<int> Dataset::classes() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const LabeledSample& s : samples) out.push_back(s.label.argmax());
  return out;
}

void Dataset::validate() const {
  if (class_names.size() < 2) throw ValidationError("dataset: need at least 2 classes");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const LabeledSample& s = samples[i];
    if (s.label.num_classes() != num_classes()) {
      throw ValidationError("dataset: sample " + std::to_string(i) + " has a label of length " +
                            std::to_string(s.label.num_classes()) + ", expected " + std::to_string(num_classes()));
    }
    const Image& first = samples[0].image;
    if (s.image.height() != first.height() || s.image.width() != first.width() ||
        s.image.channels() != first.channels()) {
      throw ValidationError("dataset: sample " + std::to_string(i) + " differs in image shape");
    }
  }
}

}  // namespace mimic
