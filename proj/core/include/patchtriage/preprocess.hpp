#pragma once

#include "patchtriage/raster.hpp"

namespace patchtriage {

struct PreprocessConfig {
  double gamma = 0.5;
  int gray_levels = 256;
  /// 256 for the segmentation path, 1024 for the classification path.
  int target_size = 256;

  void validate() const;
};

/// Copies integer samples verbatim into floats; nominal range [0, 2^depth - 1].
RasterImage cast_to_float(const IntegerRaster& raw);

/// Bins the observed [min, max] into `gray_levels` bins and maps each pixel to
/// 255 * CDF(bin). A constant image maps to 255 everywhere.
RasterImage hist_equalize(const RasterImage& img, int gray_levels);

/// out = 255 * (in / 255)^gamma. Pixels must lie in [0, 255].
RasterImage gamma_correct(const RasterImage& img, double gamma);

/// cast -> equalize -> gamma -> resize(target_size, target_size).
RasterImage preprocess_pipeline(const IntegerRaster& raw, const PreprocessConfig& cfg);

/// Same pipeline starting from an already-float image (skips the cast).
RasterImage preprocess_pipeline(const RasterImage& img, const PreprocessConfig& cfg);

}  // namespace patchtriage
