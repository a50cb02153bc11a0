#include <doctest.h>

#include "erank/scene.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace erank;

namespace {

SceneConfig small_cfg(std::uint64_t seed = 0) {
  SceneConfig cfg;
  cfg.width = 48;
  cfg.height = 48;
  cfg.frame_count = 5;
  cfg.static_entity_count = 10;
  cfg.mover_count = 3;
  cfg.mover_min_size = 3;
  cfg.mover_max_size = 12;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("generate_scene: no movers means every frame is the background") {
  SceneConfig cfg = small_cfg();
  cfg.mover_count = 0;
  const Scene scene = generate_scene(cfg);
  for (int f = 0; f < cfg.frame_count; ++f) {
    CHECK((scene.frames[static_cast<std::size_t>(f)].rgb.array() ==
           scene.truth_background.rgb.array())
              .all());
    CHECK(scene.mover_masks[static_cast<std::size_t>(f)].bits.count() == 0);
  }
}

TEST_CASE("generate_scene: zero noise reproduces true classes in semantics") {
  SceneConfig cfg = small_cfg(3);
  cfg.semantic_noise_rate = 0.0;
  const Scene scene = generate_scene(cfg);
  for (int f = 0; f < cfg.frame_count; ++f) {
    const EntityMap& emap = scene.entity_maps[static_cast<std::size_t>(f)];
    const BinaryMask& sem = scene.pseudo_semantics[static_cast<std::size_t>(f)];
    for (Eigen::Index p = 0; p < emap.pixel_count(); ++p) {
      const std::int32_t id = emap.ids(p);
      if (id == kUnassignedId) continue;  // true label comes from the pre-erosion map
      const bool is_stuff =
          scene.entity_registry[static_cast<std::size_t>(id)].cls == EntityClass::kStuff;
      CHECK(sem.bits(p) == is_stuff);
    }
  }
}

TEST_CASE("generate_scene: mover masks match independent trajectory rasterization") {
  SceneConfig cfg;  // the default desk configuration
  cfg.seed = 0;
  const Scene scene = generate_scene(cfg);
  REQUIRE(scene.mover_tracks.size() == 6);
  for (int f = 0; f < cfg.frame_count; ++f) {
    BinaryMask expected(cfg.width, cfg.height, false);
    for (const MoverTrack& t : scene.mover_tracks) {
      const BinaryMask m = oracle::rasterize_track(t, f, cfg.width, cfg.height);
      expected.bits = expected.bits || m.bits;
    }
    CHECK((expected.bits == scene.mover_masks[static_cast<std::size_t>(f)].bits).all());
  }
}

TEST_CASE("generate_scene: occlusion consistency and entity-map consistency") {
  const Scene scene = generate_scene(small_cfg(1));
  const int n_static = scene.config.static_entity_count;
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    const BinaryMask& mask = scene.mover_masks[f];
    for (Eigen::Index p = 0; p < mask.pixel_count(); ++p) {
      if (!mask.bits(p))
        CHECK((scene.frames[f].rgb.col(p).array() == scene.truth_background.rgb.col(p).array())
                  .all());
      // mover mask is exactly the set of mover-id pixels
      CHECK(mask.bits(p) == (scene.entity_maps[f].ids(p) >= n_static));
    }
  }
}

TEST_CASE("generate_scene: determinism, byte-identical serializations") {
  const SceneConfig cfg = small_cfg(7);
  const Scene a = generate_scene(cfg);
  const Scene b = generate_scene(cfg);
  const auto dir_a = testutil::fresh_dir("erank_scene_a");
  const auto dir_b = testutil::fresh_dir("erank_scene_b");
  save_scene(dir_a.string(), a);
  save_scene(dir_b.string(), b);
  CHECK(testutil::dir_bytes(dir_a) == testutil::dir_bytes(dir_b));
}

TEST_CASE("generate_scene: save/load round trip is exact") {
  const Scene scene = generate_scene(small_cfg(11));
  const auto dir = testutil::fresh_dir("erank_scene_rt");
  save_scene(dir.string(), scene);
  const Scene back = load_scene(dir.string());

  CHECK(back.config.seed == scene.config.seed);
  CHECK(back.entity_registry.size() == scene.entity_registry.size());
  CHECK(back.mover_tracks.size() == scene.mover_tracks.size());
  CHECK((back.truth_background.rgb.array() == scene.truth_background.rgb.array()).all());
  for (std::size_t f = 0; f < scene.frames.size(); ++f) {
    CHECK((back.frames[f].rgb.array() == scene.frames[f].rgb.array()).all());
    CHECK((back.entity_maps[f].ids == scene.entity_maps[f].ids).all());
    CHECK((back.mover_masks[f].bits == scene.mover_masks[f].bits).all());
    CHECK((back.pseudo_semantics[f].bits == scene.pseudo_semantics[f].bits).all());
  }
  for (std::size_t m = 0; m < scene.mover_tracks.size(); ++m) {
    CHECK(back.mover_tracks[m].positions == scene.mover_tracks[m].positions);
    CHECK(back.mover_tracks[m].colors == scene.mover_tracks[m].colors);
  }

  // re-saving the loaded scene reproduces the directory byte for byte
  const auto dir2 = testutil::fresh_dir("erank_scene_rt2");
  save_scene(dir2.string(), back);
  CHECK(testutil::dir_bytes(dir) == testutil::dir_bytes(dir2));
}

TEST_CASE("generate_scene: erosion produces unassigned rings, erosion 0 does not") {
  SceneConfig cfg = small_cfg(13);
  cfg.boundary_erosion = 1;
  const Scene eroded = generate_scene(cfg);
  CHECK((eroded.entity_maps[0].ids == kUnassignedId).count() > 0);

  cfg.boundary_erosion = 0;
  const Scene plain = generate_scene(cfg);
  CHECK((plain.entity_maps[0].ids == kUnassignedId).count() == 0);
}

TEST_CASE("generate_scene: small mover present when the range allows one") {
  const Scene scene = generate_scene(small_cfg(17));
  bool has_small = false;
  for (const auto& t : scene.mover_tracks)
    if (t.size < 8) has_small = true;
  CHECK(has_small);
}

TEST_CASE("generate_scene: per-frame mover colors change every frame") {
  const Scene scene = generate_scene(small_cfg(19));
  for (const auto& t : scene.mover_tracks)
    for (std::size_t f = 1; f < t.colors.size(); ++f) CHECK(t.colors[f] != t.colors[f - 1]);
}

TEST_CASE("generate_scene: oversized mover is an error") {
  SceneConfig cfg = small_cfg();
  cfg.mover_max_size = 100;  // larger than the 48px frame
  CHECK_THROWS(generate_scene(cfg));
}

TEST_CASE("scene config validation") {
  SceneConfig cfg = small_cfg();
  cfg.frame_count = 1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = small_cfg();
  cfg.texture_flat = 0.9;  // mix no longer sums to 1
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
  cfg = small_cfg();
  cfg.static_entity_count = 1;
  CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}
