#include "erank/patch_baseline.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace erank {

ArrayXb patch_weights(const ArrayXd& field, int width, int height,
                      const PatchBaselineConfig& cfg) {
  constexpr int P = PatchBaselineConfig::kPatchSide;
  constexpr int NB = PatchBaselineConfig::kNeighborhoodSide;
  require(width > 0 && height > 0 && width % P == 0 && height % P == 0,
          "patch_weights: region sides must be positive multiples of 8");
  require(field.size() == static_cast<Eigen::Index>(width) * height,
          "patch_weights: field size mismatch");
  require(cfg.inlier_quantile > 0.0 && cfg.inlier_quantile < 1.0,
          "patch_weights: quantile out of range");
  require(cfg.smoothing_majority > 0.0 && cfg.smoothing_majority <= 1.0,
          "patch_weights: majority out of range");

  const Eigen::Index n = field.size();
  for (Eigen::Index i = 0; i < n; ++i)
    require(std::isfinite(field(i)), "patch_weights: non-finite residual");

  // Stage 1: nearest-rank quantile; ties at the threshold count as inliers.
  std::vector<double> sorted(field.data(), field.data() + n);
  std::sort(sorted.begin(), sorted.end());
  const auto rank = static_cast<Eigen::Index>(
      std::ceil(cfg.inlier_quantile * static_cast<double>(n)));
  const double cut = sorted[static_cast<std::size_t>(std::clamp<Eigen::Index>(rank, 1, n) - 1)];
  ArrayXb stage1(n);
  for (Eigen::Index i = 0; i < n; ++i) stage1(i) = field(i) <= cut;

  // Stage 2: 3x3 majority smoothing of the inlier set.
  ArrayXb stage2(n);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Index i = static_cast<Eigen::Index>(y) * width + x;
      if (!stage1(i)) {
        stage2(i) = false;
        continue;
      }
      int inliers = 0, total = 0;
      for (int yy = std::max(0, y - 1); yy <= std::min(height - 1, y + 1); ++yy)
        for (int xx = std::max(0, x - 1); xx <= std::min(width - 1, x + 1); ++xx) {
          ++total;
          if (stage1(static_cast<Eigen::Index>(yy) * width + xx)) ++inliers;
        }
      stage2(i) = static_cast<double>(inliers) >= cfg.smoothing_majority * total;
    }
  }

  // Stage 3: per-8x8-patch decision from the surrounding 16x16 window.
  ArrayXb out(n);
  const int margin = (NB - P) / 2;
  for (int py = 0; py < height; py += P) {
    for (int px = 0; px < width; px += P) {
      const int x0 = std::max(0, px - margin), x1 = std::min(width, px + P + margin);
      const int y0 = std::max(0, py - margin), y1 = std::min(height, py + P + margin);
      int inliers = 0, total = 0;
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
          ++total;
          if (stage2(static_cast<Eigen::Index>(y) * width + x)) ++inliers;
        }
      const bool keep = 2 * inliers >= total;
      for (int y = py; y < py + P; ++y)
        for (int x = px; x < px + P; ++x)
          out(static_cast<Eigen::Index>(y) * width + x) = keep;
    }
  }
  return out;
}

}  // namespace erank
