#pragma once

// Training objectives and their gradients: soft-target cross-entropy and the
// three contrastive losses (self-supervised, supervised, mix-supervised),
// which differ only in how the positive set of each anchor is chosen.

#include "mimic/core.hpp"
#include "mimic/mixing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace mimic {

struct LossConfig {
  double temperature = 0.07;
  double loss_weight = 0.1;
  double threshold = 0.5;

  void validate() const;
};

template <typename Scalar>
struct LossValue {
  Scalar value{};
  Matrix<Scalar> grad;
};

template <typename Scalar>
Matrix<Scalar> label_matrix(std::span<const SoftLabel> labels) {
  expects(!labels.empty(), "label_matrix: no labels");
  Matrix<Scalar> out(static_cast<Index>(labels.size()), labels[0].num_classes());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    expects(labels[i].num_classes() == out.cols(), "label_matrix: labels differ in length");
    out.row(static_cast<Index>(i)) = labels[i].probs().transpose().template cast<Scalar>();
  }
  return out;
}

/// Mean over rows of −Σ_k q_k·log softmax(logits)_k.
template <typename Scalar>
LossValue<Scalar> cross_entropy(const Matrix<Scalar>& logits, const Matrix<Scalar>& targets) {
  expects(logits.rows() == targets.rows() && logits.cols() == targets.cols(),
          "cross_entropy: logits and targets have different shapes");
  expects(logits.cols() >= 2, "cross_entropy: need at least 2 classes");
  expects(logits.rows() >= 1, "cross_entropy: empty batch");
  if (!logits.allFinite()) throw NumericFault("cross_entropy: non-finite logits");
  const Index n = logits.rows();
  LossValue<Scalar> out;
  out.grad.resize(n, logits.cols());
  Scalar total = 0;
  for (Index i = 0; i < n; ++i) {
    const Scalar m = logits.row(i).maxCoeff();
    const Scalar lse = m + std::log((logits.row(i).array() - m).exp().sum());
    const auto log_p = (logits.row(i).array() - lse).eval();
    total -= (targets.row(i).array() * log_p).sum();
    out.grad.row(i) = (log_p.exp() - targets.row(i).array()) / static_cast<Scalar>(n);
  }
  out.value = total / static_cast<Scalar>(n);
  return out;
}

template <typename Scalar>
LossValue<Scalar> cross_entropy(const Matrix<Scalar>& logits, std::span<const SoftLabel> targets) {
  return cross_entropy<Scalar>(logits, label_matrix<Scalar>(targets));
}

using PositiveMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
struct ContrastiveLoss {
  Scalar value{};
  Matrix<Scalar> grad;  // d value / d z
  Index contributing_anchors = 0;
  Index skipped_anchors = 0;  // anchors with an empty positive set
};

/// Shared supervised-contrastive core. For anchor i with positives P(i) and
/// candidates A(i) = all j ≠ i:
///   ℓ_i = −(1/|P(i)|) Σ_{p∈P(i)} log( exp(z_i·z_p/τ) / Σ_{a∈A(i)} exp(z_i·z_a/τ) )
/// The loss is the mean of ℓ_i over anchors with |P(i)| > 0.
template <typename Scalar>
ContrastiveLoss<Scalar> contrastive_loss(const Matrix<Scalar>& z, const PositiveMatrix& positives, double temperature) {
  const Index n = z.rows();
  expects(temperature > 0.0, "contrastive loss: temperature must be > 0");
  expects(positives.rows() == n && positives.cols() == n, "contrastive loss: mask dimensions do not match z");
  expects(n >= 2, "contrastive loss: need at least 2 samples");
  const Scalar inv_tau = Scalar(1) / static_cast<Scalar>(temperature);

  Matrix<Scalar> logits(n, n);
  logits.noalias() = (z * z.transpose()) * inv_tau;

  ContrastiveLoss<Scalar> out;
  Matrix<Scalar> coeff = Matrix<Scalar>::Zero(n, n);  // d ℓ_i / d logit_ia
  Scalar total = 0;
  for (Index i = 0; i < n; ++i) {
    Index count = 0;
    Scalar pos_sum = 0;
    Scalar m = -std::numeric_limits<Scalar>::infinity();
    for (Index a = 0; a < n; ++a) {
      if (a == i) continue;
      m = std::max(m, logits(i, a));
      if (positives(i, a)) {
        ++count;
        pos_sum += logits(i, a);
      }
    }
    if (count == 0) {
      ++out.skipped_anchors;
      continue;
    }
    ++out.contributing_anchors;
    Scalar denom = 0;
    for (Index a = 0; a < n; ++a) {
      if (a != i) denom += std::exp(logits(i, a) - m);
    }
    const Scalar lse = m + std::log(denom);
    total += lse - pos_sum / static_cast<Scalar>(count);
    for (Index a = 0; a < n; ++a) {
      if (a == i) continue;
      coeff(i, a) = std::exp(logits(i, a) - lse) - (positives(i, a) ? Scalar(1) / static_cast<Scalar>(count) : Scalar(0));
    }
  }
  if (out.contributing_anchors == 0) {
    out.value = 0;
    out.grad = Matrix<Scalar>::Zero(n, z.cols());
    return out;
  }
  const Scalar c = static_cast<Scalar>(out.contributing_anchors);
  out.value = total / c;
  // logit_ia = z_i·z_a/τ, so dz = (G + Gᵀ) z / τ with G = coeff / C.
  const Matrix<Scalar> g = (coeff + coeff.transpose()) * (inv_tau / c);
  out.grad.noalias() = g * z;
  return out;
}

/// Self-supervised: the sibling view (same `view_of`) is the only positive.
template <typename Scalar>
ContrastiveLoss<Scalar> sscl_loss(const Matrix<Scalar>& z, std::span<const std::size_t> view_of, double temperature) {
  const Index n = z.rows();
  expects(static_cast<Index>(view_of.size()) == n, "sscl_loss: provenance length does not match z");
  PositiveMatrix pos = PositiveMatrix::Constant(n, n, false);
  for (Index i = 0; i < n; ++i) {
    Index siblings = 0;
    for (Index j = 0; j < n; ++j) {
      if (j != i && view_of[static_cast<std::size_t>(j)] == view_of[static_cast<std::size_t>(i)]) {
        pos(i, j) = true;
        ++siblings;
      }
    }
    if (siblings != 1) {
      throw ContractViolation("sscl_loss: element " + std::to_string(i) + " has " + std::to_string(siblings) +
                              " sibling views, expected exactly 1");
    }
  }
  return contrastive_loss<Scalar>(z, pos, temperature);
}

/// Supervised: every other element of the anchor's class is a positive.
template <typename Scalar>
ContrastiveLoss<Scalar> scl_loss(const Matrix<Scalar>& z, std::span<const SoftLabel> labels, double temperature) {
  const Index n = z.rows();
  expects(static_cast<Index>(labels.size()) == n, "scl_loss: label count does not match z");
  std::vector<int> cls(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    expects(labels[i].is_one_hot(), "scl_loss: labels must be one-hot");
    cls[i] = labels[i].argmax();
  }
  PositiveMatrix pos(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) pos(i, j) = i != j && cls[static_cast<std::size_t>(i)] == cls[static_cast<std::size_t>(j)];
  ContrastiveLoss<Scalar> out = contrastive_loss<Scalar>(z, pos, temperature);
  if (out.contributing_anchors == 0) {
    throw UndefinedLossError("scl_loss: every class in the batch is a singleton; fall back to sibling-view (SSCL) pairing");
  }
  return out;
}

/// Mix-supervised: positives are the `positive` entries of the pair mask.
template <typename Scalar>
ContrastiveLoss<Scalar> mscl_loss(const Matrix<Scalar>& z, const PairMask& mask, double temperature) {
  expects(mask.size() == z.rows(), "mscl_loss: pair mask dimensions do not match z");
  return contrastive_loss<Scalar>(z, mask.positives(), temperature);
}

template <typename Scalar>
struct FinetuneLoss {
  Scalar total{};
  Scalar cross_entropy{};
  Scalar contrastive{};
  Matrix<Scalar> dlogits;
  Matrix<Scalar> dz;
  Index skipped_anchors = 0;
};

/// cross_entropy + w·mscl, with gradients for both heads.
template <typename Scalar>
FinetuneLoss<Scalar> total_finetune_loss(const Matrix<Scalar>& logits, const Matrix<Scalar>& targets,
                                         const Matrix<Scalar>& z, const PairMask& mask, const LossConfig& cfg) {
  cfg.validate();
  expects(logits.rows() == z.rows() && mask.size() == z.rows(), "total_finetune_loss: batch sizes disagree");
  const LossValue<Scalar> ce = cross_entropy<Scalar>(logits, targets);
  const ContrastiveLoss<Scalar> con = mscl_loss<Scalar>(z, mask, cfg.temperature);
  const Scalar w = static_cast<Scalar>(cfg.loss_weight);
  FinetuneLoss<Scalar> out;
  out.cross_entropy = ce.value;
  out.contrastive = con.value;
  out.total = ce.value + w * con.value;
  out.dlogits = ce.grad;
  out.dz = w * con.grad;
  out.skipped_anchors = con.skipped_anchors;
  return out;
}

inline void LossConfig::validate() const {
  if (!(temperature > 0.0)) throw ConfigError("loss: temperature must be > 0");
  if (!(loss_weight >= 0.0)) throw ConfigError("loss: loss_weight must be >= 0");
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("loss: threshold must lie in [0, 1]");
}

}  // namespace mimic
