#pragma once

#include <filesystem>

#include "patchtriage/raster.hpp"

namespace patchtriage {

/// Binary PGM (P5), maxval <= 255 -> depth 8, otherwise depth 16 (big-endian
/// samples as the format prescribes).
IntegerRaster read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const IntegerRaster& raster);

/// 8-bit single-channel PNG.
IntegerRaster read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const IntegerRaster& raster);

/// Dispatches on the file signature (P5 or PNG).
IntegerRaster read_raster(const std::filesystem::path& path);
/// Dispatches on the extension: .png writes PNG, anything else PGM.
void write_raster(const std::filesystem::path& path, const IntegerRaster& raster);

/// Masks are 8-bit rasters holding raw label values {0,1,2,3}.
LabelMask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const LabelMask& mask);

IntegerRaster to_integer_raster(const LabelMask& mask);

/// Rounds and clamps float pixels into an 8-bit raster.
IntegerRaster quantize_8bit(const Grid<float>& values, float scale = 1.0f);

/// Raw float sidecar: "PTF1", uint32 height, uint32 width (little-endian),
/// then height*width little-endian float32 values in row-major order.
void write_float_sidecar(const std::filesystem::path& path, const Grid<float>& values);
Grid<float> read_float_sidecar(const std::filesystem::path& path);

}  // namespace patchtriage
