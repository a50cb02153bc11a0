#include "erank/earr.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "erank/image.hpp"

namespace erank {

PatchBatch sample_patches(Rng& rng, int width, int height, int frame_count, int k,
                          int patch_count) {
  require(k >= 1 && k <= std::min(width, height), "sample_patches: k exceeds frame dims");
  require(frame_count >= 1, "sample_patches: no frames");
  require(patch_count >= 1, "sample_patches: need at least one patch");

  PatchBatch batch;
  batch.k = k;
  batch.patches.reserve(static_cast<std::size_t>(patch_count));
  for (int i = 0; i < patch_count; ++i) {
    PatchBatch::Patch p;
    p.frame = rng.uniform_int(0, frame_count - 1);
    p.x = rng.uniform_int(0, width - k);
    p.y = rng.uniform_int(0, height - k);
    batch.patches.push_back(p);
  }
  return batch;
}

VectorXd rank_normalize(const VectorXd& residuals) {
  const Eigen::Index n = residuals.size();
  require(n >= 1, "rank_normalize: empty batch");
  for (Eigen::Index i = 0; i < n; ++i)
    require(std::isfinite(residuals(i)), "rank_normalize: non-finite residual");

  VectorXd out(n);
  if (n == 1) {
    out(0) = 0.0;
    return out;
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return residuals(a) < residuals(b);
  });

  // Walk runs of equal values; every member of a run gets the mean of the
  // run's 1-based ordinals, so a full tie maps to 0.5 after normalization.
  const double scale = 1.0 / static_cast<double>(n - 1);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && residuals(order[j + 1]) == residuals(order[i])) ++j;
    const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index t = i; t <= j; ++t) out(order[t]) = (midrank - 1.0) * scale;
    i = j + 1;
  }
  return out;
}

std::vector<EntityClusterStats> entity_cluster_average(
    const VectorXd& ranks, const std::vector<EntityMap>& entity_maps,
    const PatchBatch& batch) {
  require(ranks.size() == batch.pixel_count(), "entity_cluster_average: rank/batch size mismatch");

  std::vector<EntityClusterStats> stats;
  const int k = batch.k;
  for (std::size_t q = 0; q < batch.patches.size(); ++q) {
    const auto& patch = batch.patches[q];
    const EntityMap& emap = entity_maps.at(static_cast<std::size_t>(patch.frame));
    std::map<std::int32_t, std::vector<int>> groups;  // ordered by entity id
    const int base = static_cast<int>(q) * k * k;
    for (int oy = 0; oy < k; ++oy) {
      for (int ox = 0; ox < k; ++ox) {
        const std::int32_t id = emap.at(patch.x + ox, patch.y + oy);
        if (id == kUnassignedId) continue;
        groups[id].push_back(base + oy * k + ox);
      }
    }
    for (auto& [id, pixels] : groups) {
      EntityClusterStats s;
      s.patch_index = static_cast<int>(q);
      s.entity_id = id;
      double sum = 0.0;
      for (int i : pixels) sum += ranks(i);
      s.mean_rank = sum / static_cast<double>(pixels.size());
      s.pixel_indices = std::move(pixels);
      stats.push_back(std::move(s));
    }
  }
  return stats;
}

ArrayXb label_distractors(const std::vector<EntityClusterStats>& stats,
                          const std::function<int(int, int)>& stuff_flag,
                          const EarrConfig& cfg, const PatchBatch& batch) {
  // Unassigned pixels are included by default; only thing clusters above the
  // threshold flip to D=0.
  ArrayXb d = ArrayXb::Constant(batch.pixel_count(), true);
  for (const auto& s : stats) {
    const int flag = stuff_flag(s.patch_index, s.entity_id);
    const bool keep = flag != 0 || !(s.mean_rank > cfg.threshold);
    if (keep) continue;
    for (int i : s.pixel_indices) d(i) = false;
  }

  if (cfg.dilation_enabled) {
    const int k = batch.k;
    for (std::size_t q = 0; q < batch.patches.size(); ++q) {
      const int base = static_cast<int>(q) * k * k;
      BinaryMask excluded(k, k, false);
      bool any = false;
      for (int i = 0; i < k * k; ++i) {
        if (!d(base + i)) {
          excluded.bits(i) = true;
          any = true;
        }
      }
      if (!any) continue;
      const BinaryMask grown = dilate3x3(excluded);
      for (int i = 0; i < k * k; ++i)
        if (grown.bits(i)) d(base + i) = false;
    }
  }
  return d;
}

ArrayXb label_distractors(const std::vector<EntityClusterStats>& stats,
                          const std::unordered_map<int, int>& stuff_flags,
                          const EarrConfig& cfg, const PatchBatch& batch) {
  return label_distractors(
      stats,
      [&](int, int entity) {
        const auto it = stuff_flags.find(entity);
        require(it != stuff_flags.end(),
                "label_distractors: missing stuff flag for entity " + std::to_string(entity));
        return it->second;
      },
      cfg, batch);
}

}  // namespace erank
