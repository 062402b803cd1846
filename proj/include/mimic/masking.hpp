#pragma once

// Patchification, random patch masking, and the masked reconstruction
// objective used during pre-training.
//
// Only normalized-pixel targets are supported. Discrete-token, HOG,
// deep-feature, and frequency-domain targets are not implemented.

#include "mimic/core.hpp"
#include "mimic/random.hpp"

#include <cmath>
#include <vector>

namespace mimic {

/// D flattened patches, one per row, in row-major grid order. Each row holds
/// the patch pixels in (y, x, channel) order.
template <typename Scalar>
struct PatchGrid {
  Matrix<Scalar> patches;
  int grid_rows = 0;
  int grid_cols = 0;
  int patch_size = 0;
  int channels = 0;

  Index num_patches() const { return patches.rows(); }
  Index patch_length() const { return patches.cols(); }
};

struct MaskPlan {
  std::vector<Index> masked;  // sorted, unique
  double mask_ratio = 0.0;
  Index num_patches = 0;

  /// Complement of `masked`, sorted.
  std::vector<Index> visible() const;
  std::vector<bool> flags() const;
};

PatchGrid<float> patchify(const Image& img, int patch_size);
Image unpatchify(const PatchGrid<float>& grid);

/// Uniform subset of round(mask_ratio·D) patch indices.
MaskPlan sample_mask(Index num_patches, double mask_ratio, RandomSource& rng);

struct ReconstructionOptions {
  bool normalize_targets = true;
  /// Average over every patch instead of the masked ones only.
  bool all_patches = false;
};

template <typename Scalar>
struct ReconstructionLoss {
  Scalar value{};
  Matrix<Scalar> grad;  // d value / d pred.patches
};

/// Per-patch standardization with ε = 1e-6 on the variance.
template <typename Scalar>
Matrix<Scalar> normalize_patches(const Matrix<Scalar>& patches) {
  Matrix<Scalar> out(patches.rows(), patches.cols());
  const Scalar n = static_cast<Scalar>(patches.cols());
  for (Index r = 0; r < patches.rows(); ++r) {
    const Scalar mean = patches.row(r).sum() / n;
    const Scalar var = (patches.row(r).array() - mean).square().sum() / n;
    out.row(r) = (patches.row(r).array() - mean) / std::sqrt(var + Scalar(1e-6));
  }
  return out;
}

/// Mean squared error between prediction and (optionally normalized) target
/// over the masked patches, with its gradient w.r.t. the prediction.
template <typename Scalar>
ReconstructionLoss<Scalar> reconstruction_loss_with_grad(const Matrix<Scalar>& pred,
                                                         const Matrix<Scalar>& target,
                                                         const MaskPlan& plan,
                                                         ReconstructionOptions opts = {}) {
  expects(pred.rows() == target.rows() && pred.cols() == target.cols(),
          "reconstruction_loss: prediction and target shapes differ");
  expects(plan.num_patches == pred.rows(), "reconstruction_loss: mask plan does not match patch count");
  const Matrix<Scalar> tgt = opts.normalize_targets ? normalize_patches<Scalar>(target) : target;

  std::vector<Index> rows;
  if (opts.all_patches) {
    rows.resize(pred.rows());
    for (Index i = 0; i < pred.rows(); ++i) rows[i] = i;
  } else {
    rows = plan.masked;
  }
  expects(!rows.empty(), "reconstruction_loss: no patches to score");

  ReconstructionLoss<Scalar> out;
  out.grad = Matrix<Scalar>::Zero(pred.rows(), pred.cols());
  const Scalar count = static_cast<Scalar>(rows.size()) * static_cast<Scalar>(pred.cols());
  Scalar sum = 0;
  for (Index r : rows) {
    expects(r >= 0 && r < pred.rows(), "reconstruction_loss: mask index out of range");
    const auto diff = (pred.row(r) - tgt.row(r)).eval();
    sum += diff.squaredNorm();
    out.grad.row(r) = (Scalar(2) / count) * diff;
  }
  out.value = sum / count;
  return out;
}

template <typename Scalar>
Scalar reconstruction_loss(const PatchGrid<Scalar>& pred, const PatchGrid<Scalar>& target,
                           const MaskPlan& plan, bool normalize_targets) {
  expects(pred.grid_rows == target.grid_rows && pred.grid_cols == target.grid_cols,
          "reconstruction_loss: grid shapes differ");
  return reconstruction_loss_with_grad<Scalar>(pred.patches, target.patches, plan,
                                               {.normalize_targets = normalize_targets})
      .value;
}

}  // namespace mimic
