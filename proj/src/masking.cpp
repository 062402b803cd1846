#include "mimic/masking.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace mimic {

std::vector<Index> MaskPlan::visible() const {
  std::vector<Index> out;
  out.reserve(num_patches - masked.size());
  std::size_t m = 0;
  for (Index i = 0; i < num_patches; ++i) {
    if (m < masked.size() && masked[m] == i) {
      ++m;
    } else {
      out.push_back(i);
    }
  }
  return out;
}

std::vector<bool> MaskPlan::flags() const {
  std::vector<bool> out(num_patches, false);
  for (Index i : masked) out[i] = true;
  return out;
}

PatchGrid<float> patchify(const Image& img, int patch_size) {
  if (patch_size <= 0 || img.height() % patch_size != 0 || img.width() % patch_size != 0) {
    throw ContractViolation("patchify: image " + std::to_string(img.height()) + "x" +
                            std::to_string(img.width()) + " is not divisible by patch size " +
                            std::to_string(patch_size));
  }
  PatchGrid<float> grid;
  grid.grid_rows = img.height() / patch_size;
  grid.grid_cols = img.width() / patch_size;
  grid.patch_size = patch_size;
  grid.channels = img.channels();
  const int c = img.channels();
  grid.patches.resize(grid.grid_rows * grid.grid_cols, patch_size * patch_size * c);
  for (int gr = 0; gr < grid.grid_rows; ++gr) {
    for (int gc = 0; gc < grid.grid_cols; ++gc) {
      const Index row = gr * grid.grid_cols + gc;
      Index col = 0;
      for (int y = 0; y < patch_size; ++y) {
        for (int x = 0; x < patch_size; ++x) {
          for (int ch = 0; ch < c; ++ch) {
            grid.patches(row, col++) = img.at(gr * patch_size + y, gc * patch_size + x, ch);
          }
        }
      }
    }
  }
  return grid;
}

Image unpatchify(const PatchGrid<float>& grid) {
  const int p = grid.patch_size;
  Image img(grid.grid_rows * p, grid.grid_cols * p, grid.channels);
  for (int gr = 0; gr < grid.grid_rows; ++gr) {
    for (int gc = 0; gc < grid.grid_cols; ++gc) {
      const Index row = gr * grid.grid_cols + gc;
      Index col = 0;
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          for (int ch = 0; ch < grid.channels; ++ch) {
            img.at(gr * p + y, gc * p + x, ch) = grid.patches(row, col++);
          }
        }
      }
    }
  }
  return img;
}

MaskPlan sample_mask(Index num_patches, double mask_ratio, RandomSource& rng) {
  if (!(mask_ratio > 0.0 && mask_ratio < 1.0)) {
    throw ContractViolation("sample_mask: mask ratio must lie in (0, 1), got " + std::to_string(mask_ratio));
  }
  expects(num_patches >= 2, "sample_mask: need at least 2 patches");
  const auto count = static_cast<Index>(std::llround(mask_ratio * static_cast<double>(num_patches)));
  expects(count >= 1 && count < num_patches,
          "sample_mask: ratio leaves no masked or no visible patch for this grid");

  std::vector<Index> order(num_patches);
  std::iota(order.begin(), order.end(), Index{0});
  // Partial Fisher-Yates: the first `count` slots are the sample.
  for (Index i = 0; i < count; ++i) {
    const auto j = i + static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(num_patches - i)));
    std::swap(order[i], order[j]);
  }
  MaskPlan plan;
  plan.masked.assign(order.begin(), order.begin() + count);
  std::sort(plan.masked.begin(), plan.masked.end());
  plan.mask_ratio = mask_ratio;
  plan.num_patches = num_patches;
  return plan;
}

}  // namespace mimic
