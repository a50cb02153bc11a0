#pragma once

#include <string>

#include "erank/types.hpp"

namespace erank {

// Per-pixel entity identifier; kUnassignedId (-1) marks pixels that belong
// to no entity. Serialized as 16-bit grayscale PNG with 65535 = unassigned.
struct EntityMap {
  int width = 0;
  int height = 0;
  ArrayXi ids;

  EntityMap() = default;
  EntityMap(int w, int h, std::int32_t fill = kUnassignedId)
      : width(w), height(h), ids(ArrayXi::Constant(static_cast<Eigen::Index>(w) * h, fill)) {}

  Eigen::Index pixel_count() const { return static_cast<Eigen::Index>(width) * height; }
  Eigen::Index index(int x, int y) const { return static_cast<Eigen::Index>(y) * width + x; }
  std::int32_t at(int x, int y) const { return ids(index(x, y)); }
  void set(int x, int y, std::int32_t v) { ids(index(x, y)) = v; }
};

void save_entity_map_png(const std::string& path, const EntityMap& m);
EntityMap load_entity_map_png(const std::string& path);

}  // namespace erank
