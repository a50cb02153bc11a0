#pragma once

#include <array>
#include <string>
#include <vector>

#include "erank/entity_map.hpp"
#include "erank/image.hpp"
#include "erank/types.hpp"

namespace erank {

// Synthetic multi-frame urban-like scenes with exact ground truth. The static
// background is a Voronoi partition of textured cells (stuff) with a few
// compact solid shapes on top (static things, the "parked car" analogue);
// movers are compact shapes that translate along linear trajectories and
// change color every frame, so they are photometrically inconsistent across
// frames even where footprints overlap.

struct SceneConfig {
  int width = 128;
  int height = 128;
  int frame_count = 24;
  int static_entity_count = 40;  // stuff cells + static things
  int mover_count = 6;
  int mover_min_size = 3;  // shapes span [min,max] pixels across
  int mover_max_size = 40;
  double texture_flat = 0.4;  // cell texture mix, must sum to 1
  double texture_gradient = 0.3;
  double texture_highfreq = 0.3;
  double static_thing_fraction = 0.15;  // fraction of static entities that are things
  double semantic_noise_rate = 0.05;    // eta: per-pixel label flip probability
  int boundary_erosion = 1;             // unassigned ring width along entity borders
  std::uint64_t seed = 0;
};

void validate(const SceneConfig& cfg);

enum class EntityClass { kStuff, kStaticThing, kMover };
enum class TextureKind { kFlat, kGradient, kChecker };
enum class ShapeKind { kRect, kDisk };

std::string to_string(EntityClass c);
std::string to_string(TextureKind t);
std::string to_string(ShapeKind s);
EntityClass entity_class_from_string(const std::string& s);
TextureKind texture_from_string(const std::string& s);
ShapeKind shape_from_string(const std::string& s);

struct EntityRecord {
  int id = 0;
  EntityClass cls = EntityClass::kStuff;
  TextureKind texture = TextureKind::kFlat;
};

// Shape semantics (shared by the generator and by anything re-rasterizing a
// stored trajectory): rect covers [x, x+size) x [y, y+size); disk covers the
// pixels with (px-cx)^2 + (py-cy)^2 <= (size/2)^2 for center
// (x + (size-1)/2, y + (size-1)/2). (x, y) is the frame's stored position.
struct MoverTrack {
  int entity_id = 0;
  ShapeKind shape = ShapeKind::kRect;
  int size = 0;
  std::vector<std::array<int, 2>> positions;       // per frame
  std::vector<std::array<double, 3>> colors;       // per frame
};

struct Scene {
  SceneConfig config;
  std::vector<Image> frames;
  std::vector<EntityMap> entity_maps;
  Image truth_background;
  std::vector<BinaryMask> mover_masks;       // exact mover footprints per frame
  std::vector<BinaryMask> pseudo_semantics;  // noisy per-pixel labels, true = stuff
  std::vector<EntityRecord> entity_registry;
  std::vector<MoverTrack> mover_tracks;

  int width() const { return config.width; }
  int height() const { return config.height; }
  bool is_mover(std::int32_t id) const {
    return id != kUnassignedId &&
           entity_registry[static_cast<std::size_t>(id)].cls == EntityClass::kMover;
  }
};

// Deterministic: equal configs (including seed) produce bit-identical scenes.
// All colors are quantized to the 8-bit grid at generation, so serializing a
// scene and loading it back reproduces it exactly.
Scene generate_scene(const SceneConfig& cfg);

// Directory layout: scene.json, background.png, frames/NNN.png,
// entities/NNN.png (16-bit, 65535 = unassigned), movers/NNN.png,
// semantics/NNN.png (255 = stuff).
void save_scene(const std::string& dir, const Scene& scene);
Scene load_scene(const std::string& dir);

}  // namespace erank
