#include <doctest.h>

#include <set>

#include "patchtriage/random.hpp"
#include "patchtriage/raster.hpp"

using namespace patchtriage;

namespace {

RasterImage random_image(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  RasterImage img(h, w);
  for (float& v : img.pixels()) v = static_cast<float>(rng.uniform(0.0, 255.0));
  return img;
}

LabelMask random_mask(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  LabelMask m(h, w);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) m.set(r, c, static_cast<Anatomy>(rng.below(4)));
  return m;
}

}  // namespace

TEST_CASE("resize_image keeps constants constant") {
  RasterImage img(256, 256, 7.0f);
  RasterImage out = resize_image(img, 128, 128);
  CHECK(out.height() == 128);
  CHECK(out.width() == 128);
  for (float v : out.pixels()) CHECK(v == doctest::Approx(7.0f));
}

TEST_CASE("resize_image to own size is the identity") {
  RasterImage img = random_image(17, 23, 1);
  CHECK(resize_image(img, 17, 23) == img);
}

TEST_CASE("resize_image bilinear with aligned endpoints") {
  RasterImage img(Grid<float>(2, 2, std::vector<float>{0, 100, 0, 100}));
  RasterImage out = resize_image(img, 2, 4);
  const float expected[] = {0.0f, 100.0f / 3.0f, 200.0f / 3.0f, 100.0f};
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) CHECK(out(r, c) == doctest::Approx(expected[c]).epsilon(1e-6));
}

TEST_CASE("resize_image rejects zero dimensions") {
  RasterImage img(4, 4);
  CHECK_THROWS_AS(resize_image(img, 0, 4), InvalidArgument);
  CHECK_THROWS_AS(resize_image(img, 4, 0), InvalidArgument);
}

TEST_CASE("resize_image is deterministic") {
  RasterImage img = random_image(31, 29, 2);
  CHECK(resize_image(img, 64, 50) == resize_image(img, 64, 50));
}

TEST_CASE("resize_mask checkerboard expands into blocks") {
  LabelMask m(Grid<std::uint8_t>(2, 2, std::vector<std::uint8_t>{0, 1, 2, 3}));
  LabelMask out = resize_mask(m, 4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) CHECK(out(r, c) == m(r / 2, c / 2));
}

TEST_CASE("resize_mask upsampling picks the nearest source pixel") {
  LabelMask m = random_mask(16, 16, 3);
  LabelMask out = resize_mask(m, 64, 64);
  for (int r = 0; r < 64; ++r)
    for (int c = 0; c < 64; ++c) CHECK(out(r, c) == m(r / 4, c / 4));
}

TEST_CASE("resize_mask never introduces labels") {
  LabelMask uniform(9, 9, Anatomy::left_lung);
  for (int s : {1, 5, 13, 40}) {
    LabelMask out = resize_mask(uniform, s, s + 3);
    for (auto v : out.grid().values()) CHECK(v == 2);
  }
  LabelMask m(12, 12, Anatomy::background);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 12; ++c) m.set(r, c, Anatomy::heart);
  for (int s : {3, 7, 25}) {
    std::set<int> seen;
    LabelMask out = resize_mask(m, s, s);
    for (auto v : out.grid().values()) seen.insert(v);
    for (int v : seen) CHECK((v == 0 || v == 1));
  }
  CHECK_THROWS_AS(resize_mask(m, 0, 3), InvalidArgument);
}

TEST_CASE("LabelMask rejects labels outside 0..3") {
  CHECK_THROWS_AS(LabelMask(Grid<std::uint8_t>(1, 2, std::vector<std::uint8_t>{0, 4})), InvalidArgument);
}

TEST_CASE("apply_mask") {
  RasterImage img = random_image(10, 10, 4);
  LabelMask bg(10, 10);
  RasterImage none = apply_mask(img, bg, LabelSet::lungs());
  for (float v : none.pixels()) CHECK(v == 0.0f);
  LabelMask any = random_mask(10, 10, 5);
  CHECK(apply_mask(img, any, LabelSet::all()) == img);

  // left half lung: nonzero count matches the lung label count
  LabelMask half(10, 10);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 5; ++c) half.set(r, c, c % 2 ? Anatomy::right_lung : Anatomy::left_lung);
  RasterImage bright(10, 10, 9.0f);
  RasterImage kept = apply_mask(bright, half, LabelSet::lungs());
  long long nonzero = 0, lung = 0;
  for (float v : kept.pixels()) nonzero += v != 0.0f;
  for (auto v : half.grid().values()) lung += is_lung_label(v);
  CHECK(nonzero == lung);
  CHECK(nonzero == 50);

  RasterImage once = apply_mask(img, any, LabelSet::lungs());
  CHECK(apply_mask(once, any, LabelSet::lungs()) == once);
  CHECK_THROWS_AS(apply_mask(img, LabelMask(9, 10), LabelSet::lungs()), InvalidArgument);
}

TEST_CASE("crop and embed") {
  RasterImage img = random_image(12, 15, 6);
  CHECK(crop(img, 0, 0, 12, 15) == img);
  RasterImage px = crop(img, 4, 7, 1, 1);
  CHECK(px(0, 0) == img(4, 7));
  CHECK_THROWS_AS(crop(img, 5, 5, 8, 3), InvalidArgument);
  CHECK_THROWS_AS(crop(img, -1, 0, 2, 2), InvalidArgument);

  // re-embedding a crop equals masking with the rectangle indicator
  RasterImage back = embed(crop(img, 3, 2, 5, 6), 3, 2, 12, 15);
  for (int r = 0; r < 12; ++r) {
    for (int c = 0; c < 15; ++c) {
      const bool inside = r >= 3 && r < 8 && c >= 2 && c < 8;
      CHECK(back(r, c) == (inside ? img(r, c) : 0.0f));
    }
  }
}

TEST_CASE("box_downsample averages blocks") {
  Grid<float> g(2, 4, std::vector<float>{1, 3, 5, 7, 1, 3, 5, 7});
  Grid<float> d = box_downsample(g, 2);
  CHECK(d.rows() == 1);
  CHECK(d(0, 0) == 2.0f);
  CHECK(d(0, 1) == 6.0f);
  CHECK_THROWS_AS(box_downsample(g, 3), InvalidArgument);
}
