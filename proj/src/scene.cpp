#include "erank/scene.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "erank/png_io.hpp"
#include "erank/rng.hpp"

namespace erank {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double quantize8(double v) { return std::lround(255.0 * clamp01(v)) / 255.0; }

Eigen::Vector3d random_color(Rng& rng) {
  return {quantize8(rng.next_double()), quantize8(rng.next_double()),
          quantize8(rng.next_double())};
}

struct CellStyle {
  TextureKind kind = TextureKind::kFlat;
  Eigen::Vector3d color_a = Eigen::Vector3d::Zero();
  Eigen::Vector3d color_b = Eigen::Vector3d::Zero();
  double angle = 0.0;  // gradient direction
  int period = 2;      // checker period
};

struct StaticThing {
  ShapeKind shape = ShapeKind::kRect;
  int size = 0;
  int x = 0, y = 0;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
};

bool shape_covers(ShapeKind shape, int size, int ox, int oy, int px, int py) {
  if (shape == ShapeKind::kRect)
    return px >= ox && px < ox + size && py >= oy && py < oy + size;
  const double cx = ox + (size - 1) / 2.0;
  const double cy = oy + (size - 1) / 2.0;
  const double r = size / 2.0;
  const double dx = px - cx, dy = py - cy;
  return dx * dx + dy * dy <= r * r;
}

void paint_shape(ShapeKind shape, int size, int x, int y, int id,
                 const Eigen::Vector3d& color, EntityMap& emap, Image& img) {
  const int x1 = std::min(emap.width, x + size), y1 = std::min(emap.height, y + size);
  for (int py = std::max(0, y); py < y1; ++py)
    for (int px = std::max(0, x); px < x1; ++px)
      if (shape_covers(shape, size, x, y, px, py)) {
        emap.set(px, py, id);
        img.rgb.col(img.index(px, py)) = color;
      }
}

// Marks a ring of unassigned pixels of the requested width along entity
// borders (8-neighborhood). Only applied to static maps, before movers.
EntityMap erode_boundaries(const EntityMap& map, int width_px) {
  if (width_px <= 0) return map;
  BinaryMask boundary(map.width, map.height, false);
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x) {
      const std::int32_t id = map.at(x, y);
      bool edge = false;
      for (int dy = -1; dy <= 1 && !edge; ++dy)
        for (int dx = -1; dx <= 1 && !edge; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= map.width || ny >= map.height) continue;
          if (map.at(nx, ny) != id) edge = true;
        }
      if (edge) boundary.set(x, y, true);
    }
  for (int i = 1; i < width_px; ++i) boundary = dilate3x3(boundary);

  EntityMap out = map;
  for (Eigen::Index p = 0; p < out.pixel_count(); ++p)
    if (boundary.bits(p)) out.ids(p) = kUnassignedId;
  return out;
}

}  // namespace

void validate(const SceneConfig& cfg) {
  require(cfg.width >= 4 && cfg.height >= 4, "scene: image too small");
  require(cfg.frame_count >= 2, "scene: frame_count must be >= 2");
  require(cfg.static_entity_count >= 2, "scene: static_entity_count must be >= 2");
  require(cfg.mover_count >= 0, "scene: mover_count must be >= 0");
  require(cfg.mover_min_size >= 1 && cfg.mover_min_size <= cfg.mover_max_size,
          "scene: bad mover size range");
  const double mix = cfg.texture_flat + cfg.texture_gradient + cfg.texture_highfreq;
  require(cfg.texture_flat >= 0 && cfg.texture_gradient >= 0 && cfg.texture_highfreq >= 0 &&
              std::abs(mix - 1.0) <= 1e-9,
          "scene: texture mix must sum to 1");
  require(cfg.static_thing_fraction >= 0.0 && cfg.static_thing_fraction <= 1.0,
          "scene: static_thing_fraction out of range");
  require(cfg.semantic_noise_rate >= 0.0 && cfg.semantic_noise_rate <= 1.0,
          "scene: semantic_noise_rate out of range");
  require(cfg.boundary_erosion >= 0, "scene: boundary_erosion must be >= 0");
}

Scene generate_scene(const SceneConfig& cfg) {
  validate(cfg);
  require(cfg.mover_max_size <= std::min(cfg.width, cfg.height),
          "scene: mover larger than image");

  const int n_things =
      std::min(static_cast<int>(std::lround(cfg.static_thing_fraction * cfg.static_entity_count)),
               cfg.static_entity_count - 1);
  const int n_cells = cfg.static_entity_count - n_things;
  const int n_static = cfg.static_entity_count;

  Scene scene;
  scene.config = cfg;

  Rng layout_rng = derive_stream(cfg.seed, "layout");
  EntityMap static_map;          // after erosion
  EntityMap true_static_map;     // before erosion, for semantics ground truth
  Image background;
  std::vector<CellStyle> styles;
  std::vector<StaticThing> things;

  constexpr int kMaxAttempts = 32;
  bool ok = false;
  for (int attempt = 0; attempt < kMaxAttempts && !ok; ++attempt) {
    styles.assign(static_cast<std::size_t>(n_cells), {});
    things.assign(static_cast<std::size_t>(n_things), {});

    // Voronoi sites and cell textures.
    std::vector<std::array<double, 2>> sites(static_cast<std::size_t>(n_cells));
    for (auto& s : sites) {
      s[0] = layout_rng.uniform(0.0, cfg.width);
      s[1] = layout_rng.uniform(0.0, cfg.height);
    }
    for (auto& style : styles) {
      const double u = layout_rng.next_double();
      if (u < cfg.texture_flat) style.kind = TextureKind::kFlat;
      else if (u < cfg.texture_flat + cfg.texture_gradient) style.kind = TextureKind::kGradient;
      else style.kind = TextureKind::kChecker;
      style.color_a = random_color(layout_rng);
      switch (style.kind) {
        case TextureKind::kFlat:
          break;
        case TextureKind::kGradient:
          style.color_b = random_color(layout_rng);
          style.angle = layout_rng.uniform(0.0, 2.0 * std::numbers::pi);
          break;
        case TextureKind::kChecker:
          // High contrast but off-gray mean: the partner color is the
          // half-rotated hue, 0.5 away in every channel.
          for (int c = 0; c < 3; ++c)
            style.color_b(c) = quantize8(style.color_a(c) < 0.5 ? style.color_a(c) + 0.5
                                                                : style.color_a(c) - 0.5);
          style.period = layout_rng.uniform_int(2, 4);
          break;
      }
    }
    for (auto& t : things) {
      t.shape = layout_rng.next_double() < 0.5 ? ShapeKind::kRect : ShapeKind::kDisk;
      t.size = layout_rng.uniform_int(cfg.mover_min_size, cfg.mover_max_size);
      t.x = layout_rng.uniform_int(0, cfg.width - t.size);
      t.y = layout_rng.uniform_int(0, cfg.height - t.size);
      t.color = random_color(layout_rng);
    }

    // Compose the static map and the background image.
    true_static_map = EntityMap(cfg.width, cfg.height);
    background = Image(cfg.width, cfg.height);
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        int best = 0;
        double best_d = 1e300;
        for (int i = 0; i < n_cells; ++i) {
          const double dx = x - sites[static_cast<std::size_t>(i)][0];
          const double dy = y - sites[static_cast<std::size_t>(i)][1];
          const double d = dx * dx + dy * dy;
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
        true_static_map.set(x, y, best);
      }

    // Cell textures need per-cell projection ranges for gradients.
    std::vector<double> proj_min(static_cast<std::size_t>(n_cells), 1e300);
    std::vector<double> proj_max(static_cast<std::size_t>(n_cells), -1e300);
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const int cell = true_static_map.at(x, y);
        const CellStyle& st = styles[static_cast<std::size_t>(cell)];
        if (st.kind != TextureKind::kGradient) continue;
        const double proj = std::cos(st.angle) * x + std::sin(st.angle) * y;
        proj_min[static_cast<std::size_t>(cell)] =
            std::min(proj_min[static_cast<std::size_t>(cell)], proj);
        proj_max[static_cast<std::size_t>(cell)] =
            std::max(proj_max[static_cast<std::size_t>(cell)], proj);
      }
    for (int y = 0; y < cfg.height; ++y)
      for (int x = 0; x < cfg.width; ++x) {
        const int cell = true_static_map.at(x, y);
        const CellStyle& st = styles[static_cast<std::size_t>(cell)];
        Eigen::Vector3d color = st.color_a;
        if (st.kind == TextureKind::kGradient) {
          const double lo = proj_min[static_cast<std::size_t>(cell)];
          const double hi = proj_max[static_cast<std::size_t>(cell)];
          const double proj = std::cos(st.angle) * x + std::sin(st.angle) * y;
          const double t = hi > lo ? (proj - lo) / (hi - lo) : 0.0;
          for (int c = 0; c < 3; ++c)
            color(c) = quantize8(st.color_a(c) + t * (st.color_b(c) - st.color_a(c)));
        } else if (st.kind == TextureKind::kChecker) {
          const bool odd = ((x / st.period) + (y / st.period)) % 2 != 0;
          color = odd ? st.color_b : st.color_a;
        }
        background.rgb.col(background.index(x, y)) = color;
      }

    for (int i = 0; i < n_things; ++i) {
      const StaticThing& t = things[static_cast<std::size_t>(i)];
      paint_shape(t.shape, t.size, t.x, t.y, n_cells + i, t.color, true_static_map, background);
    }

    static_map = erode_boundaries(true_static_map, cfg.boundary_erosion);

    // Every static entity must survive erosion and occlusion by things.
    std::vector<bool> seen(static_cast<std::size_t>(n_static), false);
    for (Eigen::Index p = 0; p < static_map.pixel_count(); ++p)
      if (static_map.ids(p) != kUnassignedId) seen[static_cast<std::size_t>(static_map.ids(p))] = true;
    ok = std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
  }
  if (!ok) throw std::runtime_error("scene: could not place static entities (zero-area cell)");

  scene.truth_background = background;
  for (int i = 0; i < n_cells; ++i)
    scene.entity_registry.push_back({i, EntityClass::kStuff, styles[static_cast<std::size_t>(i)].kind});
  for (int i = 0; i < n_things; ++i)
    scene.entity_registry.push_back({n_cells + i, EntityClass::kStaticThing, TextureKind::kFlat});

  // Movers: slow linear trajectories, a fresh color corner every frame.
  Rng mover_rng = derive_stream(cfg.seed, "movers");
  for (int m = 0; m < cfg.mover_count; ++m) {
    MoverTrack track;
    track.entity_id = n_static + m;
    track.shape = mover_rng.next_double() < 0.5 ? ShapeKind::kRect : ShapeKind::kDisk;
    track.size = mover_rng.uniform_int(cfg.mover_min_size, cfg.mover_max_size);
    // Guarantee one mover that fits strictly inside an 8x8 patch whenever the
    // size range allows it.
    if (m == 0 && cfg.mover_min_size < 8) track.size = cfg.mover_min_size;
    require(track.size <= std::min(cfg.width, cfg.height), "scene: mover larger than image");

    double speed = mover_rng.uniform(0.3, 1.3);
    const double angle = mover_rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double ux = std::cos(angle), uy = std::sin(angle);
    const double span = static_cast<double>(cfg.frame_count - 1);
    double x0 = 0.0, y0 = 0.0;
    for (int tries = 0; tries < 64; ++tries) {
      const double dx = ux * speed * span, dy = uy * speed * span;
      const double x_lo = std::max(0.0, -dx), x_hi = (cfg.width - track.size) - std::max(0.0, dx);
      const double y_lo = std::max(0.0, -dy), y_hi = (cfg.height - track.size) - std::max(0.0, dy);
      if (x_hi >= x_lo && y_hi >= y_lo) {
        x0 = mover_rng.uniform(x_lo, x_hi);
        y0 = mover_rng.uniform(y_lo, y_hi);
        break;
      }
      speed *= 0.5;  // too fast to stay in bounds for the whole clip
    }

    int prev_corner = -1;
    for (int f = 0; f < cfg.frame_count; ++f) {
      const int px = static_cast<int>(std::clamp<long>(
          std::lround(x0 + ux * speed * f), 0, cfg.width - track.size));
      const int py = static_cast<int>(std::clamp<long>(
          std::lround(y0 + uy * speed * f), 0, cfg.height - track.size));
      track.positions.push_back({px, py});

      int corner = static_cast<int>(mover_rng.next_below(prev_corner < 0 ? 8 : 7));
      if (prev_corner >= 0 && corner >= prev_corner) ++corner;  // skip last frame's corner
      prev_corner = corner;
      const double jitter = mover_rng.uniform(0.0, 0.1);
      std::array<double, 3> color{};
      for (int c = 0; c < 3; ++c)
        color[static_cast<std::size_t>(c)] =
            quantize8((corner >> c) & 1 ? 1.0 - jitter : jitter);
      track.colors.push_back(color);
    }
    scene.mover_tracks.push_back(std::move(track));
    scene.entity_registry.push_back({n_static + m, EntityClass::kMover, TextureKind::kFlat});
  }

  // Per-frame composition.
  Rng sem_rng = derive_stream(cfg.seed, "semantics");
  for (int f = 0; f < cfg.frame_count; ++f) {
    EntityMap emap = static_map;
    Image frame = background;
    for (const MoverTrack& track : scene.mover_tracks) {
      const auto& pos = track.positions[static_cast<std::size_t>(f)];
      const auto& col = track.colors[static_cast<std::size_t>(f)];
      paint_shape(track.shape, track.size, pos[0], pos[1], track.entity_id,
                  {col[0], col[1], col[2]}, emap, frame);
    }

    BinaryMask mover_mask(cfg.width, cfg.height, false);
    for (Eigen::Index p = 0; p < emap.pixel_count(); ++p)
      mover_mask.bits(p) = emap.ids(p) >= n_static;

    // True semantics come from the pre-erosion map plus the mover overlay;
    // every pixel gets a label, then flips independently with rate eta.
    BinaryMask semantics(cfg.width, cfg.height, false);
    for (Eigen::Index p = 0; p < emap.pixel_count(); ++p) {
      const std::int32_t true_id =
          mover_mask.bits(p) ? emap.ids(p) : true_static_map.ids(p);
      const bool is_stuff =
          scene.entity_registry[static_cast<std::size_t>(true_id)].cls == EntityClass::kStuff;
      const bool flip = sem_rng.next_double() < cfg.semantic_noise_rate;
      semantics.bits(p) = is_stuff != flip;
    }

    scene.frames.push_back(std::move(frame));
    scene.entity_maps.push_back(std::move(emap));
    scene.mover_masks.push_back(std::move(mover_mask));
    scene.pseudo_semantics.push_back(std::move(semantics));
  }
  return scene;
}

// --- Serialization -----------------------------------------------------------

std::string to_string(EntityClass c) {
  switch (c) {
    case EntityClass::kStuff: return "stuff";
    case EntityClass::kStaticThing: return "static-thing";
    case EntityClass::kMover: return "mover";
  }
  return "?";
}

std::string to_string(TextureKind t) {
  switch (t) {
    case TextureKind::kFlat: return "flat";
    case TextureKind::kGradient: return "gradient";
    case TextureKind::kChecker: return "checker";
  }
  return "?";
}

std::string to_string(ShapeKind s) { return s == ShapeKind::kRect ? "rect" : "disk"; }

EntityClass entity_class_from_string(const std::string& s) {
  if (s == "stuff") return EntityClass::kStuff;
  if (s == "static-thing") return EntityClass::kStaticThing;
  if (s == "mover") return EntityClass::kMover;
  throw std::invalid_argument("unknown entity class: " + s);
}

TextureKind texture_from_string(const std::string& s) {
  if (s == "flat") return TextureKind::kFlat;
  if (s == "gradient") return TextureKind::kGradient;
  if (s == "checker") return TextureKind::kChecker;
  throw std::invalid_argument("unknown texture: " + s);
}

ShapeKind shape_from_string(const std::string& s) {
  if (s == "rect") return ShapeKind::kRect;
  if (s == "disk") return ShapeKind::kDisk;
  throw std::invalid_argument("unknown shape: " + s);
}

namespace {

json config_to_json(const SceneConfig& c) {
  return json{{"width", c.width},
              {"height", c.height},
              {"frame_count", c.frame_count},
              {"static_entity_count", c.static_entity_count},
              {"mover_count", c.mover_count},
              {"mover_min_size", c.mover_min_size},
              {"mover_max_size", c.mover_max_size},
              {"texture_flat", c.texture_flat},
              {"texture_gradient", c.texture_gradient},
              {"texture_highfreq", c.texture_highfreq},
              {"static_thing_fraction", c.static_thing_fraction},
              {"semantic_noise_rate", c.semantic_noise_rate},
              {"boundary_erosion", c.boundary_erosion},
              {"seed", c.seed}};
}

SceneConfig config_from_json(const json& j) {
  SceneConfig c;
  c.width = j.at("width");
  c.height = j.at("height");
  c.frame_count = j.at("frame_count");
  c.static_entity_count = j.at("static_entity_count");
  c.mover_count = j.at("mover_count");
  c.mover_min_size = j.at("mover_min_size");
  c.mover_max_size = j.at("mover_max_size");
  c.texture_flat = j.at("texture_flat");
  c.texture_gradient = j.at("texture_gradient");
  c.texture_highfreq = j.at("texture_highfreq");
  c.static_thing_fraction = j.at("static_thing_fraction");
  c.semantic_noise_rate = j.at("semantic_noise_rate");
  c.boundary_erosion = j.at("boundary_erosion");
  c.seed = j.at("seed");
  return c;
}

std::string frame_name(int f) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03d", f);
  return std::string(buf) + ".png";
}

}  // namespace

void save_scene(const std::string& dir, const Scene& scene) {
  fs::create_directories(dir);
  for (const char* sub : {"frames", "entities", "movers", "semantics"})
    fs::create_directories(fs::path(dir) / sub);

  json j;
  j["config"] = config_to_json(scene.config);
  json entities = json::array();
  for (const EntityRecord& e : scene.entity_registry)
    entities.push_back({{"id", e.id}, {"class", to_string(e.cls)}, {"texture", to_string(e.texture)}});
  j["entities"] = entities;
  json movers = json::array();
  for (const MoverTrack& t : scene.mover_tracks) {
    json positions = json::array(), colors = json::array();
    for (const auto& p : t.positions) positions.push_back({p[0], p[1]});
    for (const auto& c : t.colors) colors.push_back({c[0], c[1], c[2]});
    movers.push_back({{"entity_id", t.entity_id},
                      {"shape", to_string(t.shape)},
                      {"size", t.size},
                      {"positions", positions},
                      {"colors", colors}});
  }
  j["movers"] = movers;
  std::ofstream out(fs::path(dir) / "scene.json");
  out << j.dump(2) << "\n";
  require(static_cast<bool>(out), "scene: cannot write scene.json");

  save_image_png((fs::path(dir) / "background.png").string(), scene.truth_background);
  for (int f = 0; f < scene.config.frame_count; ++f) {
    save_image_png((fs::path(dir) / "frames" / frame_name(f)).string(),
                   scene.frames[static_cast<std::size_t>(f)]);
    save_entity_map_png((fs::path(dir) / "entities" / frame_name(f)).string(),
                        scene.entity_maps[static_cast<std::size_t>(f)]);
    save_mask_png((fs::path(dir) / "movers" / frame_name(f)).string(),
                  scene.mover_masks[static_cast<std::size_t>(f)]);
    save_mask_png((fs::path(dir) / "semantics" / frame_name(f)).string(),
                  scene.pseudo_semantics[static_cast<std::size_t>(f)]);
  }
}

Scene load_scene(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "scene.json");
  require(static_cast<bool>(in), "scene: cannot open " + dir + "/scene.json");
  json j = json::parse(in);

  Scene scene;
  scene.config = config_from_json(j.at("config"));
  for (const json& e : j.at("entities"))
    scene.entity_registry.push_back(
        {e.at("id"), entity_class_from_string(e.at("class")), texture_from_string(e.at("texture"))});
  for (const json& m : j.at("movers")) {
    MoverTrack t;
    t.entity_id = m.at("entity_id");
    t.shape = shape_from_string(m.at("shape"));
    t.size = m.at("size");
    for (const json& p : m.at("positions")) t.positions.push_back({p.at(0), p.at(1)});
    for (const json& c : m.at("colors")) t.colors.push_back({c.at(0), c.at(1), c.at(2)});
    scene.mover_tracks.push_back(std::move(t));
  }

  scene.truth_background = load_image_png((fs::path(dir) / "background.png").string());
  for (int f = 0; f < scene.config.frame_count; ++f) {
    scene.frames.push_back(
        load_image_png((fs::path(dir) / "frames" / frame_name(f)).string()));
    scene.entity_maps.push_back(
        load_entity_map_png((fs::path(dir) / "entities" / frame_name(f)).string()));
    scene.mover_masks.push_back(
        load_mask_png((fs::path(dir) / "movers" / frame_name(f)).string()));
    scene.pseudo_semantics.push_back(
        load_mask_png((fs::path(dir) / "semantics" / frame_name(f)).string()));
  }
  return scene;
}

}  // namespace erank
