#include <doctest.h>

#include <filesystem>

#include "erank/image.hpp"
#include "erank/png_io.hpp"
#include "erank/rng.hpp"
#include "oracles.hpp"

using namespace erank;

namespace {

BinaryMask random_mask(Rng& rng, int w, int h, double p = 0.5) {
  BinaryMask m(w, h);
  for (Eigen::Index i = 0; i < m.pixel_count(); ++i) m.bits(i) = rng.next_double() < p;
  return m;
}

Image random_image(Rng& rng, int w, int h) {
  Image img(w, h);
  for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c) img.rgb(c, p) = rng.next_double();
  return img;
}

}  // namespace

TEST_CASE("psnr: identical images hit the clamp ceiling") {
  Rng rng(7);
  const Image img = random_image(rng, 9, 5);
  CHECK(psnr(img, img) == doctest::Approx(100.0).epsilon(1e-12));
}

TEST_CASE("psnr: constant 0.1 offset gives 20 dB") {
  Image a(8, 8, 0.3), b(8, 8, 0.4);
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-12));
}

TEST_CASE("psnr: symmetric and matches brute force on random images") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Image a = random_image(rng, 13, 7);
    const Image b = random_image(rng, 13, 7);
    const BinaryMask region = random_mask(rng, 13, 7, 0.7);
    if (!region.bits.any()) continue;
    CHECK(psnr(a, b) == doctest::Approx(oracle::psnr_bruteforce(a, b, nullptr)).epsilon(1e-12));
    CHECK(psnr(a, b, &region) ==
          doctest::Approx(oracle::psnr_bruteforce(a, b, &region)).epsilon(1e-12));
    CHECK(psnr(a, b) == psnr(b, a));
  }
}

TEST_CASE("psnr: errors") {
  Image a(4, 4), b(5, 4);
  CHECK_THROWS_AS(psnr(a, b), std::invalid_argument);
  Image c(4, 4);
  BinaryMask empty(4, 4, false);
  CHECK_THROWS_AS(psnr(a, c, &empty), std::invalid_argument);
  BinaryMask wrong(5, 4, true);
  CHECK_THROWS_AS(psnr(a, c, &wrong), std::invalid_argument);
}

TEST_CASE("iou: identity, disjoint, empty") {
  BinaryMask a(6, 6, false);
  a.set(1, 1, true);
  a.set(2, 3, true);
  CHECK(iou(a, a) == 1.0);
  BinaryMask b(6, 6, false);
  b.set(4, 4, true);
  CHECK(iou(a, b) == 0.0);
  BinaryMask e1(6, 6, false), e2(6, 6, false);
  CHECK(iou(e1, e2) == 1.0);
  BinaryMask wrong(5, 6, false);
  CHECK_THROWS_AS(iou(a, wrong), std::invalid_argument);
}

TEST_CASE("iou: random 16x16 pairs match exhaustive counting") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const BinaryMask a = random_mask(rng, 16, 16);
    const BinaryMask b = random_mask(rng, 16, 16);
    CHECK(iou(a, b) == oracle::iou_bruteforce(a, b));
    CHECK(iou(a, b) == iou(b, a));
    CHECK(iou(a, b) >= 0.0);
    CHECK(iou(a, b) <= 1.0);
  }
}

TEST_CASE("dilate3x3: single interior pixel becomes a 3x3 block") {
  BinaryMask m(11, 11, false);
  m.set(5, 5, true);
  const BinaryMask d = dilate3x3(m);
  CHECK(d.bits.count() == 9);
  for (int y = 4; y <= 6; ++y)
    for (int x = 4; x <= 6; ++x) CHECK(d.at(x, y));
}

TEST_CASE("dilate3x3: empty stays empty, corner clips to 2x2") {
  BinaryMask m(8, 8, false);
  CHECK(dilate3x3(m).bits.count() == 0);
  m.set(0, 0, true);
  const BinaryMask d = dilate3x3(m);
  CHECK((d.bits == oracle::dilate3x3_bruteforce(m).bits).all());
  CHECK(d.bits.count() == 4);
}

TEST_CASE("dilate3x3: monotone and extensive on random masks") {
  Rng rng(5);
  for (int trial = 0; trial < 25; ++trial) {
    const BinaryMask m = random_mask(rng, 32, 32, 0.2);
    BinaryMask super = m;
    for (Eigen::Index i = 0; i < super.pixel_count(); ++i)
      if (rng.next_double() < 0.05) super.bits(i) = true;

    const BinaryMask dm = dilate3x3(m), ds = dilate3x3(super);
    CHECK((dm.bits == oracle::dilate3x3_bruteforce(m).bits).all());
    // extensive: m subset of dilate(m)
    CHECK((m.bits && !dm.bits).count() == 0);
    // monotone: m subset of super implies dilate(m) subset of dilate(super)
    CHECK((dm.bits && !ds.bits).count() == 0);
  }
}

TEST_CASE("png: rgb8 round trip") {
  Rng rng(17);
  Image img(23, 9);
  for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c)
      img.rgb(c, p) = static_cast<double>(rng.uniform_int(0, 255)) / 255.0;
  const auto dir = std::filesystem::temp_directory_path() / "erank_png_test";
  std::filesystem::create_directories(dir);
  save_image_png((dir / "img.png").string(), img);
  const Image back = load_image_png((dir / "img.png").string());
  REQUIRE(back.width == img.width);
  REQUIRE(back.height == img.height);
  CHECK((back.rgb - img.rgb).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("png: mask and 16-bit entity map round trips") {
  Rng rng(19);
  const auto dir = std::filesystem::temp_directory_path() / "erank_png_test";
  std::filesystem::create_directories(dir);

  const BinaryMask m = random_mask(rng, 31, 17);
  save_mask_png((dir / "mask.png").string(), m);
  CHECK((load_mask_png((dir / "mask.png").string()).bits == m.bits).all());

  EntityMap emap(19, 13);
  for (Eigen::Index p = 0; p < emap.pixel_count(); ++p)
    emap.ids(p) = rng.next_double() < 0.1 ? kUnassignedId : rng.uniform_int(0, 40000);
  save_entity_map_png((dir / "emap.png").string(), emap);
  CHECK((load_entity_map_png((dir / "emap.png").string()).ids == emap.ids).all());
}

TEST_CASE("png: deterministic encoding") {
  Rng rng(23);
  const Image img = random_image(rng, 12, 12);
  png::Buffer buf;
  buf.width = img.width;
  buf.height = img.height;
  buf.format = png::Format::kRgb8;
  buf.rgb8.resize(static_cast<std::size_t>(img.pixel_count()) * 3);
  for (Eigen::Index p = 0; p < img.pixel_count(); ++p)
    for (int c = 0; c < 3; ++c)
      buf.rgb8[3 * static_cast<std::size_t>(p) + c] =
          static_cast<std::uint8_t>(std::lround(255.0 * img.rgb(c, p)));
  CHECK(png::encode(buf) == png::encode(buf));
}

TEST_CASE("rng: deterministic streams and uniform bounds") {
  Rng a = derive_stream(42, "sampling");
  Rng b = derive_stream(42, "sampling");
  Rng c = derive_stream(42, "init");
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64(), vb = b.next_u64(), vc = c.next_u64();
    all_equal = all_equal && va == vb;
    any_diff = any_diff || va != vc;
  }
  CHECK(all_equal);
  CHECK(any_diff);

  Rng r(0);
  for (int i = 0; i < 1000; ++i) {
    const int v = r.uniform_int(3, 9);
    CHECK(v >= 3);
    CHECK(v <= 9);
    const double u = r.next_double();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
