#include "patchtriage/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace patchtriage {

void PreprocessConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InvalidArgument("gamma must be positive");
  if (gray_levels < 2) throw InvalidArgument("gray_levels must be >= 2");
  if (target_size < 1) throw InvalidArgument("target_size must be >= 1");
}

RasterImage cast_to_float(const IntegerRaster& raw) {
  if (raw.depth != 8 && raw.depth != 16) throw InvalidArgument("unsupported bit depth; expected 8 or 16");
  if (raw.height < 1 || raw.width < 1) throw InvalidArgument("raster has zero extent");
  if (raw.values.size() != static_cast<std::size_t>(raw.height) * raw.width) {
    throw InvalidArgument("raster value count does not match its dimensions");
  }
  const float hi = static_cast<float>((1u << raw.depth) - 1u);
  std::vector<float> px(raw.values.begin(), raw.values.end());
  return RasterImage(Grid<float>(raw.height, raw.width, std::move(px)), {0.0f, hi});
}

RasterImage hist_equalize(const RasterImage& img, int gray_levels) {
  if (img.size() == 0) throw InvalidArgument("hist_equalize: empty image");
  if (gray_levels < 2) throw InvalidArgument("gray_levels must be >= 2");

  const auto px = img.pixels();
  const auto [lo_it, hi_it] = std::minmax_element(px.begin(), px.end());
  const double lo = *lo_it;
  const double span = static_cast<double>(*hi_it) - lo;

  auto bin_of = [&](float v) -> std::size_t {
    if (span <= 0.0) return 0;
    const double scaled = (static_cast<double>(v) - lo) * gray_levels / span;
    const auto b = static_cast<long long>(std::floor(scaled));
    return static_cast<std::size_t>(std::clamp<long long>(b, 0, gray_levels - 1));
  };

  std::vector<std::size_t> bins(px.size());
  std::vector<std::uint64_t> hist(static_cast<std::size_t>(gray_levels), 0);
  for (std::size_t i = 0; i < px.size(); ++i) {
    bins[i] = bin_of(px[i]);
    ++hist[bins[i]];
  }
  std::vector<float> level(hist.size());
  std::uint64_t cumulative = 0;
  const double total = static_cast<double>(px.size());
  for (std::size_t b = 0; b < hist.size(); ++b) {
    cumulative += hist[b];
    level[b] = static_cast<float>(255.0 * static_cast<double>(cumulative) / total);
  }

  RasterImage out(img.height(), img.width(), 0.0f, {0.0f, 255.0f});
  auto dst = out.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) dst[i] = level[bins[i]];
  return out;
}

RasterImage gamma_correct(const RasterImage& img, double gamma) {
  if (!(gamma > 0.0)) throw InvalidArgument("gamma must be positive");
  RasterImage out(img.height(), img.width(), 0.0f, {0.0f, 255.0f});
  const auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const float v = src[i];
    if (v < 0.0f) throw InvalidArgument("gamma_correct: negative pixel value");
    if (v > 255.0f || !std::isfinite(v)) throw InvalidArgument("gamma_correct: pixel outside [0, 255]");
    dst[i] = static_cast<float>(255.0 * std::pow(static_cast<double>(v) / 255.0, gamma));
  }
  return out;
}

RasterImage preprocess_pipeline(const RasterImage& img, const PreprocessConfig& cfg) {
  cfg.validate();
  RasterImage eq = hist_equalize(img, cfg.gray_levels);
  RasterImage g = gamma_correct(eq, cfg.gamma);
  return resize_image(g, cfg.target_size, cfg.target_size);
}

RasterImage preprocess_pipeline(const IntegerRaster& raw, const PreprocessConfig& cfg) {
  cfg.validate();
  return preprocess_pipeline(cast_to_float(raw), cfg);
}

}  // namespace patchtriage
