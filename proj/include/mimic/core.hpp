#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mimic {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

// Error hierarchy. Every failure the library reports derives from Error so the
// CLI can map it to exit code 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractViolation : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct LoadError : Error {
  using Error::Error;
};
/// Raised when a supervised contrastive loss has no anchor with a positive.
struct UndefinedLossError : Error {
  using Error::Error;
};
struct NumericFault : Error {
  NumericFault(const std::string& what, int layer = -1) : Error(what), layer(layer) {}
  int layer;
};

inline void expects(bool condition, const std::string& message) {
  if (!condition) throw ContractViolation(message);
}

/// Channels-last image with values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels);
  Image(int height, int width, int channels, std::vector<float> data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }

  float& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  float at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  /// Throws ValidationError if any value is non-finite or outside [0, 1].
  void validate() const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Probability vector over K classes.
class SoftLabel {
 public:
  SoftLabel() = default;

  static SoftLabel one_hot(int cls, int num_classes);
  /// λ·a + (1−λ)·b.
  static SoftLabel mix(const SoftLabel& a, const SoftLabel& b, double lambda);

  int num_classes() const { return static_cast<int>(probs_.size()); }
  const Eigen::VectorXd& probs() const { return probs_; }
  double operator[](int k) const { return probs_[k]; }

  bool is_one_hot() const;
  /// Index of the largest entry; the first one on ties.
  int argmax() const;

  friend bool operator==(const SoftLabel& a, const SoftLabel& b) {
    return a.probs_.size() == b.probs_.size() && a.probs_ == b.probs_;
  }

 private:
  explicit SoftLabel(Eigen::VectorXd probs) : probs_(std::move(probs)) {}
  friend SoftLabel validate_soft_label(std::span<const double> values);

  Eigen::VectorXd probs_;
};

inline constexpr double kLabelTolerance = 1e-6;

SoftLabel validate_soft_label(std::span<const double> values);

/// Total-variation distance ½·Σ|a_k − b_k|, in [0, 1].
double label_distance(const SoftLabel& a, const SoftLabel& b);

struct LabeledSample {
  Image image;
  SoftLabel label;
  std::string source_id;
};

struct Provenance {
  std::size_t view_of = 0;
  std::optional<std::size_t> mix_partner;
  std::optional<double> mix_coefficient;
  /// Label of this element before mixing (the label of input `view_of`).
  SoftLabel view_label;
};

/// 2B views derived from B inputs, optionally mixed.
struct MultiviewBatch {
  std::vector<LabeledSample> samples;
  std::vector<Provenance> provenance;
  std::size_t input_count = 0;

  std::size_t size() const { return samples.size(); }
  bool mixed() const;
  std::vector<SoftLabel> labels() const;
};

/// Labeled images plus the class-name table. Labels of stored datasets are
/// one-hot; num_classes() is the table length.
struct Dataset {
  std::vector<LabeledSample> samples;
  std::vector<std::string> class_names;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  int num_classes() const { return static_cast<int>(class_names.size()); }
  /// argmax class of every sample.
  std::vector<int> classes() const;
  /// Uniform image shape, label length K, and K ≥ 2. Throws ValidationError.
  void validate() const;
};

/// Recomputes element i's label from its provenance record.
SoftLabel reconstruct_label(const MultiviewBatch& batch, std::size_t i);

/// Checks the length, provenance, and label invariants. Throws ValidationError.
void check_invariants(const MultiviewBatch& batch);

}  // namespace mimic
