#pragma once

#include "erank/types.hpp"

namespace erank {

// Patch-statistics robust baseline: inlier/outlier decisions are made for
// whole non-overlapping 8x8 patches from residual statistics in a fixed
// 16x16 neighborhood. The stage constants beyond the 8/16 structure are
// exposed here because only the structure is pinned down.
struct PatchBaselineConfig {
  double inlier_quantile = 0.9;   // q: stage-1 inlier cut
  double smoothing_majority = 0.5;  // s: stage-2 3x3 majority
  static constexpr int kPatchSide = 8;
  static constexpr int kNeighborhoodSide = 16;
};

// Residual field over a region whose sides are multiples of 8 -> D mask.
//   stage 1: pixel is inlier iff its residual <= the q-quantile of the region
//   stage 2: an inlier survives iff >= s of its 3x3 neighborhood (border
//            clipped) was stage-1 inlier
//   stage 3: each 8x8 patch becomes wholly D=1 iff >= 50% of its centered
//            16x16 neighborhood (border clipped) is stage-2 inlier
// `field` is row-major, length width*height; the result has one bool per
// pixel, constant on every 8x8 patch.
ArrayXb patch_weights(const ArrayXd& field, int width, int height,
                      const PatchBaselineConfig& cfg);

}  // namespace erank
