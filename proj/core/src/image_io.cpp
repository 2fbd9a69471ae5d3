#include "patchtriage/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace patchtriage {

namespace {

std::string quoted(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

void validate(const IntegerRaster& r) {
  if (r.height < 1 || r.width < 1) throw InvalidArgument("raster has zero extent");
  if (r.depth != 8 && r.depth != 16) throw InvalidArgument("raster depth must be 8 or 16");
  if (r.values.size() != static_cast<std::size_t>(r.height) * r.width) {
    throw InvalidArgument("raster value count does not match its dimensions");
  }
  if (r.depth == 8) {
    for (auto v : r.values) {
      if (v > 255) throw InvalidArgument("8-bit raster holds a value above 255");
    }
  }
}

// Reads one whitespace/comment-delimited header token.
std::string pgm_token(std::istream& in) {
  std::string token;
  char ch;
  while (in.get(ch)) {
    if (ch == '#') {
      std::string discard;
      std::getline(in, discard);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!token.empty()) break;
      continue;
    }
    token.push_back(ch);
  }
  return token;
}

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

IntegerRaster read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + quoted(path));
  if (pgm_token(in) != "P5") throw IoError(quoted(path) + " is not a binary PGM (P5)");
  IntegerRaster r;
  int maxval = 0;
  try {
    r.width = std::stoi(pgm_token(in));
    r.height = std::stoi(pgm_token(in));
    maxval = std::stoi(pgm_token(in));
  } catch (const std::exception&) {
    throw IoError("malformed PGM header in " + quoted(path));
  }
  if (r.width < 1 || r.height < 1 || maxval < 1 || maxval > 65535) {
    throw IoError("unsupported PGM header in " + quoted(path));
  }
  r.depth = maxval <= 255 ? 8 : 16;
  const std::size_t count = static_cast<std::size_t>(r.width) * r.height;
  const std::size_t bytes = count * (r.depth == 8 ? 1 : 2);
  std::vector<unsigned char> buf(bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) throw IoError("truncated PGM data in " + quoted(path));
  r.values.resize(count);
  if (r.depth == 8) {
    for (std::size_t i = 0; i < count; ++i) r.values[i] = buf[i];
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      r.values[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
  }
  return r;
}

void write_pgm(const std::filesystem::path& path, const IntegerRaster& raster) {
  validate(raster);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + quoted(path));
  out << "P5\n" << raster.width << ' ' << raster.height << '\n' << (raster.depth == 8 ? 255 : 65535) << '\n';
  std::vector<unsigned char> buf;
  buf.reserve(raster.values.size() * 2);
  for (auto v : raster.values) {
    if (raster.depth == 16) buf.push_back(static_cast<unsigned char>(v >> 8));
    buf.push_back(static_cast<unsigned char>(v & 0xFF));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing " + quoted(path));
}

IntegerRaster read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + quoted(path));
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("libpng initialisation failed");
  }
  IntegerRaster r;
  std::vector<png_bytep> rows;
  std::vector<unsigned char> data;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("corrupt PNG " + quoted(path));
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);
  const auto color = png_get_color_type(png, info);
  const auto depth = png_get_bit_depth(png, info);
  if (color != PNG_COLOR_TYPE_GRAY || depth != 8) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError(quoted(path) + " is not an 8-bit grayscale PNG");
  }
  r.width = static_cast<int>(png_get_image_width(png, info));
  r.height = static_cast<int>(png_get_image_height(png, info));
  r.depth = 8;
  data.resize(static_cast<std::size_t>(r.width) * r.height);
  rows.resize(static_cast<std::size_t>(r.height));
  for (int y = 0; y < r.height; ++y) rows[static_cast<std::size_t>(y)] = data.data() + static_cast<std::size_t>(y) * r.width;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  r.values.assign(data.begin(), data.end());
  return r;
}

void write_png(const std::filesystem::path& path, const IntegerRaster& raster) {
  validate(raster);
  if (raster.depth != 8) throw InvalidArgument("PNG writer supports 8-bit rasters only");
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + quoted(path));
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("libpng initialisation failed");
  }
  std::vector<unsigned char> data(raster.values.begin(), raster.values.end());
  std::vector<png_bytep> rows(static_cast<std::size_t>(raster.height));
  for (int y = 0; y < raster.height; ++y) rows[static_cast<std::size_t>(y)] = data.data() + static_cast<std::size_t>(y) * raster.width;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("failed writing PNG " + quoted(path));
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(raster.width), static_cast<png_uint_32>(raster.height), 8,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or text chunks: identical pixels give identical bytes.
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

IntegerRaster read_raster(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + quoted(path));
  std::array<unsigned char, 8> sig{};
  in.read(reinterpret_cast<char*>(sig.data()), sig.size());
  in.close();
  if (sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G') return read_png(path);
  if (sig[0] == 'P' && sig[1] == '5') return read_pgm(path);
  throw IoError(quoted(path) + " is neither PNG nor binary PGM");
}

void write_raster(const std::filesystem::path& path, const IntegerRaster& raster) {
  if (path.extension() == ".png") {
    write_png(path, raster);
  } else {
    write_pgm(path, raster);
  }
}

LabelMask read_mask(const std::filesystem::path& path) {
  const IntegerRaster r = read_raster(path);
  if (r.depth != 8) throw IoError("mask " + quoted(path) + " must be 8-bit");
  Grid<std::uint8_t> labels(r.height, r.width);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    if (r.values[i] >= kAnatomyCount) throw IoError("mask " + quoted(path) + " holds a label outside {0,1,2,3}");
    labels[i] = static_cast<std::uint8_t>(r.values[i]);
  }
  return LabelMask(std::move(labels));
}

IntegerRaster to_integer_raster(const LabelMask& mask) {
  IntegerRaster r{mask.height(), mask.width(), 8, {}};
  r.values.assign(mask.grid().values().begin(), mask.grid().values().end());
  return r;
}

void write_mask(const std::filesystem::path& path, const LabelMask& mask) {
  write_raster(path, to_integer_raster(mask));
}

IntegerRaster quantize_8bit(const Grid<float>& values, float scale) {
  IntegerRaster r{values.rows(), values.cols(), 8, {}};
  r.values.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::round(static_cast<double>(values[i]) * scale);
    r.values[i] = static_cast<std::uint16_t>(std::clamp(v, 0.0, 255.0));
  }
  return r;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in) {
  unsigned char b[4] = {};
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

}  // namespace

void write_float_sidecar(const std::filesystem::path& path, const Grid<float>& values) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + quoted(path));
  out.write("PTF1", 4);
  put_u32(out, static_cast<std::uint32_t>(values.rows()));
  put_u32(out, static_cast<std::uint32_t>(values.cols()));
  for (float v : values.values()) put_u32(out, std::bit_cast<std::uint32_t>(v));
  if (!out) throw IoError("failed writing " + quoted(path));
}

Grid<float> read_float_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + quoted(path));
  char magic[4] = {};
  in.read(magic, 4);
  if (std::memcmp(magic, "PTF1", 4) != 0) throw IoError(quoted(path) + " is not a float sidecar");
  const auto rows = static_cast<int>(get_u32(in));
  const auto cols = static_cast<int>(get_u32(in));
  std::vector<float> v(static_cast<std::size_t>(rows) * cols);
  for (auto& x : v) x = std::bit_cast<float>(get_u32(in));
  if (!in) throw IoError("truncated float sidecar " + quoted(path));
  return Grid<float>(rows, cols, std::move(v));
}

}  // namespace patchtriage
