#include <doctest.h>

#include <fstream>

#include "oracles.hpp"
#include "patchtriage/image_io.hpp"
#include "patchtriage/random.hpp"

using namespace patchtriage;

namespace {

IntegerRaster random_raster(int h, int w, int depth, std::uint64_t seed) {
  Rng rng(seed);
  IntegerRaster r{h, w, depth, {}};
  const int maxv = depth == 8 ? 255 : 65535;
  for (int i = 0; i < h * w; ++i) r.values.push_back(static_cast<std::uint16_t>(rng.uniform_int(0, maxv)));
  return r;
}

void check_same(const IntegerRaster& a, const IntegerRaster& b) {
  CHECK(a.height == b.height);
  CHECK(a.width == b.width);
  CHECK(a.depth == b.depth);
  CHECK(a.values == b.values);
}

}  // namespace

TEST_CASE("PGM round trip at 8 and 16 bits") {
  oracle::TempDir dir("io");
  for (int depth : {8, 16}) {
    IntegerRaster r = random_raster(13, 21, depth, depth);
    auto path = dir.path() / ("img" + std::to_string(depth) + ".pgm");
    write_pgm(path, r);
    check_same(read_pgm(path), r);
    check_same(read_raster(path), r);
  }
}

TEST_CASE("16-bit PGM samples are big-endian") {
  oracle::TempDir dir("io");
  IntegerRaster r{1, 1, 16, {0x0102}};
  auto path = dir.path() / "one.pgm";
  write_pgm(path, r);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  REQUIRE(bytes.size() >= 2);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 0x01);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 0x02);
}

TEST_CASE("PNG round trip") {
  oracle::TempDir dir("io");
  IntegerRaster r = random_raster(9, 14, 8, 3);
  auto path = dir.path() / "img.png";
  write_png(path, r);
  check_same(read_png(path), r);
  check_same(read_raster(path), r);
}

TEST_CASE("masks round trip through both formats") {
  oracle::TempDir dir("io");
  LabelMask m(5, 6);
  m.set(1, 1, Anatomy::heart);
  m.set(2, 3, Anatomy::left_lung);
  m.set(4, 5, Anatomy::right_lung);
  for (const char* name : {"m.png", "m.pgm"}) {
    write_mask(dir.path() / name, m);
    CHECK(read_mask(dir.path() / name) == m);
  }
}

TEST_CASE("read_mask reports out-of-range labels as a malformed file") {
  oracle::TempDir dir("io");
  write_png(dir.path() / "bad.png", IntegerRaster{1, 2, 8, {0, 7}});
  CHECK_THROWS_AS(read_mask(dir.path() / "bad.png"), IoError);
}

TEST_CASE("missing and malformed files raise IoError") {
  oracle::TempDir dir("io");
  CHECK_THROWS_AS(read_raster(dir.path() / "nope.pgm"), IoError);
  std::ofstream(dir.path() / "junk.pgm") << "not an image";
  CHECK_THROWS_AS(read_raster(dir.path() / "junk.pgm"), IoError);
  CHECK_THROWS_AS(write_pgm(dir.path() / "missing" / "x.pgm", IntegerRaster{1, 1, 8, {0}}), IoError);
}

TEST_CASE("quantize_8bit rounds and clamps") {
  Grid<float> g(1, 4, std::vector<float>{-3.0f, 0.4f, 0.6f, 300.0f});
  IntegerRaster q = quantize_8bit(g);
  CHECK(q.values == std::vector<std::uint16_t>{0, 0, 1, 255});
  Grid<float> unit(1, 2, std::vector<float>{0.5f, 1.0f});
  CHECK(quantize_8bit(unit, 255.0f).values == std::vector<std::uint16_t>{128, 255});
}

TEST_CASE("float sidecar round trip and header") {
  oracle::TempDir dir("io");
  Grid<float> g(3, 2, std::vector<float>{0.0f, 0.25f, 1.0f, -2.5f, 1e-7f, 3.5f});
  auto path = dir.path() / "map.ptf";
  write_float_sidecar(path, g);
  CHECK(read_float_sidecar(path) == g);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  CHECK(bytes.size() == 12 + 6 * 4);
  CHECK(bytes.substr(0, 4) == "PTF1");
  CHECK(bytes[4] == 3);
  CHECK(bytes[8] == 2);
}
