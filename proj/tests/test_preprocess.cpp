#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "patchtriage/phantom.hpp"
#include "patchtriage/preprocess.hpp"
#include "patchtriage/random.hpp"

using namespace patchtriage;

namespace {

IntegerRaster random_raster(int h, int w, int maxv, std::uint64_t seed) {
  Rng rng(seed);
  IntegerRaster r{h, w, maxv > 255 ? 16 : 8, {}};
  for (int i = 0; i < h * w; ++i) r.values.push_back(static_cast<std::uint16_t>(rng.uniform_int(0, maxv)));
  return r;
}

}  // namespace

TEST_CASE("cast_to_float copies samples and sets the nominal range") {
  RasterImage a = cast_to_float(IntegerRaster{1, 1, 8, {255}});
  CHECK(a(0, 0) == 255.0f);
  CHECK(a.nominal_range() == IntensityRange{0.0f, 255.0f});
  RasterImage b = cast_to_float(IntegerRaster{1, 1, 16, {4095}});
  CHECK(b(0, 0) == 4095.0f);
  CHECK(b.nominal_range() == IntensityRange{0.0f, 65535.0f});
  RasterImage z = cast_to_float(IntegerRaster{3, 3, 8, std::vector<std::uint16_t>(9, 0)});
  for (float v : z.pixels()) CHECK(v == 0.0f);
  CHECK_THROWS_AS(cast_to_float(IntegerRaster{1, 1, 12, {0}}), InvalidArgument);
}

TEST_CASE("hist_equalize on a constant image gives 255") {
  RasterImage out = hist_equalize(RasterImage(8, 8, 42.0f), 256);
  for (float v : out.pixels()) CHECK(v == 255.0f);
}

TEST_CASE("hist_equalize two-level image") {
  RasterImage img(4, 4, 10.0f);
  for (int r = 0; r < 2; ++r)
    for (int c = 0; c < 4; ++c) img(r, c) = 90.0f;
  RasterImage out = hist_equalize(img, 256);
  CHECK(out(3, 0) == doctest::Approx(127.5));
  CHECK(out(0, 0) == doctest::Approx(255.0));
}

TEST_CASE("hist_equalize leaves a uniform 256-level image within one step") {
  RasterImage img(16, 256);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 256; ++c) img(r, c) = static_cast<float>(c);
  RasterImage out = hist_equalize(img, 256);
  for (int c = 0; c < 256; ++c) CHECK(std::abs(out(0, c) - img(0, c)) <= 255.0f / 256.0f + 1e-4f);
}

TEST_CASE("hist_equalize is monotone and bounded") {
  IntegerRaster raw = random_raster(20, 30, 1000, 7);
  RasterImage img = cast_to_float(raw);
  RasterImage out = hist_equalize(img, 64);
  for (std::size_t i = 0; i < img.size(); ++i) {
    CHECK(out.pixels()[i] >= 0.0f);
    CHECK(out.pixels()[i] <= 255.0f);
    for (std::size_t j = 0; j < img.size(); j += 37) {
      if (img.pixels()[i] <= img.pixels()[j]) CHECK(out.pixels()[i] <= out.pixels()[j]);
    }
  }
}

TEST_CASE("equalized CDF stays within the largest bin mass of the diagonal") {
  IntegerRaster raw = random_raster(32, 32, 255, 11);
  for (auto& v : raw.values) v = static_cast<std::uint16_t>(v * v / 255);  // skewed histogram
  RasterImage out = hist_equalize(cast_to_float(raw), 256);
  std::map<float, long long> counts;
  for (float v : out.pixels()) ++counts[v];
  const double n = static_cast<double>(out.size());
  double largest = 0.0, cum = 0.0;
  for (auto& [v, c] : counts) largest = std::max(largest, c / n);
  for (auto& [v, c] : counts) {
    cum += c / n;
    CHECK(std::abs(cum - v / 255.0) <= largest + 1e-6);
  }
}

TEST_CASE("gamma_correct") {
  RasterImage img(Grid<float>(1, 3, std::vector<float>{0.0f, 63.75f, 255.0f}));
  for (double g : {0.3, 0.5, 1.0, 2.2}) {
    RasterImage out = gamma_correct(img, g);
    CHECK(out(0, 0) == 0.0f);
    CHECK(out(0, 2) == doctest::Approx(255.0));
  }
  CHECK(gamma_correct(img, 0.5)(0, 1) == doctest::Approx(127.5));
  CHECK(gamma_correct(img, 1.0)(0, 1) == doctest::Approx(63.75));
  RasterImage neg(1, 1, -1.0f);
  CHECK_THROWS_AS(gamma_correct(neg, 0.5), InvalidArgument);
  // strictly monotone on [0, 255]
  RasterImage ramp(1, 256);
  for (int c = 0; c < 256; ++c) ramp(0, c) = static_cast<float>(c);
  RasterImage g = gamma_correct(ramp, 0.5);
  for (int c = 1; c < 256; ++c) CHECK(g(0, c) > g(0, c - 1));
}

TEST_CASE("PreprocessConfig validation") {
  CHECK_NOTHROW(PreprocessConfig{}.validate());
  CHECK_THROWS_AS((PreprocessConfig{.gamma = 0.0}.validate()), InvalidArgument);
  CHECK_THROWS_AS((PreprocessConfig{.gray_levels = 1}.validate()), InvalidArgument);
  CHECK_THROWS_AS((PreprocessConfig{.target_size = 0}.validate()), InvalidArgument);
}

TEST_CASE("pipeline shape, range and determinism") {
  IntegerRaster raw = random_raster(40, 52, 255, 3);
  PreprocessConfig cfg{.target_size = 24};
  RasterImage out = preprocess_pipeline(raw, cfg);
  CHECK(out.height() == 24);
  CHECK(out.width() == 24);
  for (float v : out.pixels()) {
    CHECK(v >= 0.0f);
    CHECK(v <= 255.0f);
  }
  CHECK(preprocess_pipeline(raw, cfg) == out);
}

TEST_CASE("pipeline ignores an order-preserving intensity shift") {
  IntegerRaster raw = random_raster(30, 30, 200, 5);
  IntegerRaster shifted = raw;
  for (auto& v : shifted.values) v = static_cast<std::uint16_t>(v + 37);
  PreprocessConfig cfg{.target_size = 30};
  CHECK(preprocess_pipeline(raw, cfg) == preprocess_pipeline(shifted, cfg));

  IntegerRaster wide = raw;
  wide.depth = 16;
  for (auto& v : wide.values) v = static_cast<std::uint16_t>(v * 300 + 1000);
  CHECK(preprocess_pipeline(raw, cfg) == preprocess_pipeline(wide, cfg));
}

TEST_CASE("applying the pipeline twice moves pixels by at most one step") {
  for (auto cls : {PhantomClass::normal, PhantomClass::viral_covid}) {
    Phantom ph = gen_phantom(default_phantom_spec(cls, 128, 9));
    PreprocessConfig cfg{.target_size = 128};
    RasterImage once = preprocess_pipeline(ph.image, cfg);
    RasterImage twice = preprocess_pipeline(once, cfg);
    float worst = 0.0f;
    for (std::size_t i = 0; i < once.size(); ++i) worst = std::max(worst, std::abs(twice.pixels()[i] - once.pixels()[i]));
    CHECK(worst <= 255.0f / cfg.gray_levels + 1e-3f);
  }
}
