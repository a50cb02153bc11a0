#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "erank/entity_map.hpp"
#include "erank/rng.hpp"
#include "erank/types.hpp"

namespace erank {

// Entity-wise average of residual ranks: residuals of a sampled batch are
// rank-normalized to [0,1], averaged per (patch, entity) cluster, and a
// cluster whose average exceeds the threshold has all of its pixels labeled
// D=0 (excluded from the reconstruction loss). Entities flagged as stuff are
// always kept; unassigned pixels are always kept; an optional 3x3 dilation of
// the excluded region mops up boundary pixels afterwards.

struct PatchBatch {
  struct Patch {
    int frame = 0;
    int x = 0;  // origin of the k x k window, top-left
    int y = 0;
  };
  std::vector<Patch> patches;
  int k = 0;

  // Batch pixel order: patch-major, row-major inside each patch.
  Eigen::Index pixel_count() const {
    return static_cast<Eigen::Index>(patches.size()) * k * k;
  }
};

struct EarrConfig {
  int k = 64;
  double threshold = 0.8;  // T
  bool dilation_enabled = true;
};

struct EntityClusterStats {
  int patch_index = 0;
  int entity_id = 0;
  std::vector<int> pixel_indices;  // positions in the batch pixel order
  double mean_rank = 0.0;

  int size() const { return static_cast<int>(pixel_indices.size()); }
};

// Each patch draws an independent uniform frame index and uniform in-bounds
// origin (draw order: frame, x, y).
PatchBatch sample_patches(Rng& rng, int width, int height, int frame_count, int k,
                          int patch_count);

// Midranks mapped to [0,1]: ties share the mean of their ordinal positions,
// then r = (R-1)/(N-1). A single residual maps to 0. The mean of the result
// is exactly 0.5 for N >= 2.
VectorXd rank_normalize(const VectorXd& residuals);

// Groups the batch pixels of every patch by entity id (unassigned pixels form
// no cluster) and averages their normalized ranks. Clusters are emitted in
// (patch index, entity id) order.
std::vector<EntityClusterStats> entity_cluster_average(
    const VectorXd& ranks, const std::vector<EntityMap>& entity_maps,
    const PatchBatch& batch);

// D over the batch pixels. Thing clusters (stuff flag 0) are excluded iff
// their mean rank exceeds the threshold; stuff clusters and unassigned pixels
// are always kept; dilation (when enabled) grows the excluded region by one
// pixel inside each patch and may overwrite stuff/unassigned pixels.
// `stuff_flag(patch, entity)` must answer for every cluster.
ArrayXb label_distractors(const std::vector<EntityClusterStats>& stats,
                          const std::function<int(int, int)>& stuff_flag,
                          const EarrConfig& cfg, const PatchBatch& batch);

// Spec-shaped overload with one flag per entity; throws if a clustered entity
// has no flag.
ArrayXb label_distractors(const std::vector<EntityClusterStats>& stats,
                          const std::unordered_map<int, int>& stuff_flags,
                          const EarrConfig& cfg, const PatchBatch& batch);

}  // namespace erank
