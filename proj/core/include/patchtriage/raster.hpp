#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "patchtriage/grid.hpp"

namespace patchtriage {

/// Nominal intensity range the pixels were drawn from (e.g. [0, 255] for
/// 8-bit sources). Informational; pixel values are not clamped to it.
struct IntensityRange {
  float lo = 0.0f;
  float hi = 255.0f;
  friend bool operator==(const IntensityRange&, const IntensityRange&) = default;
};

/// Unsigned integer raster as read from disk, before float casting.
struct IntegerRaster {
  int height = 0;
  int width = 0;
  int depth = 8;  // bits per sample: 8 or 16
  std::vector<std::uint16_t> values;
};

/// 2-D float intensity image, m rows by n columns.
class RasterImage {
 public:
  RasterImage() = default;
  RasterImage(int height, int width, float fill = 0.0f, IntensityRange range = {});
  RasterImage(Grid<float> pixels, IntensityRange range = {});

  int height() const noexcept { return pixels_.rows(); }
  int width() const noexcept { return pixels_.cols(); }
  std::size_t size() const noexcept { return pixels_.size(); }

  float& operator()(int r, int c) noexcept { return pixels_(r, c); }
  float operator()(int r, int c) const noexcept { return pixels_(r, c); }

  const Grid<float>& grid() const noexcept { return pixels_; }
  Grid<float>& grid() noexcept { return pixels_; }
  std::span<const float> pixels() const noexcept { return pixels_.values(); }
  std::span<float> pixels() noexcept { return pixels_.values(); }

  IntensityRange nominal_range() const noexcept { return range_; }
  void set_nominal_range(IntensityRange r) noexcept { range_ = r; }

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  Grid<float> pixels_;
  IntensityRange range_;
};

enum class Anatomy : std::uint8_t { background = 0, heart = 1, left_lung = 2, right_lung = 3 };

inline constexpr int kAnatomyCount = 4;

inline constexpr bool is_lung_label(std::uint8_t label) noexcept { return label == 2 || label == 3; }

/// Subset of anatomy labels, used to select what survives masking.
class LabelSet {
 public:
  constexpr LabelSet() = default;
  constexpr LabelSet(std::initializer_list<Anatomy> labels) {
    for (Anatomy a : labels) bits_ |= static_cast<std::uint8_t>(1u << static_cast<unsigned>(a));
  }
  static constexpr LabelSet lungs() { return {Anatomy::left_lung, Anatomy::right_lung}; }
  static constexpr LabelSet all() {
    return {Anatomy::background, Anatomy::heart, Anatomy::left_lung, Anatomy::right_lung};
  }
  constexpr bool contains(std::uint8_t label) const noexcept {
    return label < kAnatomyCount && ((bits_ >> label) & 1u) != 0;
  }

 private:
  std::uint8_t bits_ = 0;
};

/// Per-pixel anatomy labels in {0=background, 1=heart, 2=left lung, 3=right lung}.
class LabelMask {
 public:
  LabelMask() = default;
  LabelMask(int height, int width, Anatomy fill = Anatomy::background);
  /// Throws InvalidArgument if any label is outside {0,1,2,3}.
  explicit LabelMask(Grid<std::uint8_t> labels);

  int height() const noexcept { return labels_.rows(); }
  int width() const noexcept { return labels_.cols(); }
  std::size_t size() const noexcept { return labels_.size(); }

  std::uint8_t operator()(int r, int c) const noexcept { return labels_(r, c); }
  void set(int r, int c, Anatomy a) noexcept { labels_(r, c) = static_cast<std::uint8_t>(a); }

  const Grid<std::uint8_t>& grid() const noexcept { return labels_; }

  /// 0/1 indicator of pixels whose label is in `labels`.
  Grid<std::uint8_t> select(LabelSet labels) const;

  friend bool operator==(const LabelMask&, const LabelMask&) = default;

 private:
  Grid<std::uint8_t> labels_;
};

using BinaryMask = Grid<std::uint8_t>;

/// Bilinear resampling with endpoint-aligned coordinates: output index i maps
/// to source position i*(in-1)/(out-1); a 1-pixel output samples the source
/// centre. Resizing to the input's own size reproduces it exactly.
RasterImage resize_image(const RasterImage& img, int out_h, int out_w);

/// Nearest-neighbour label resampling (pixel-centre convention). Never
/// introduces a label that is absent from the input.
LabelMask resize_mask(const LabelMask& mask, int out_h, int out_w);

/// Zeroes every pixel whose label is not in `keep`.
RasterImage apply_mask(const RasterImage& img, const LabelMask& mask, LabelSet keep);

/// p x q sub-grid with its top-left corner at (top, left). No resampling.
RasterImage crop(const RasterImage& img, int top, int left, int p, int q);

/// Copies `patch` into an m x n zero image at (top, left).
RasterImage embed(const RasterImage& patch, int top, int left, int m, int n);

/// Average over non-overlapping factor x factor blocks. Dimensions must be
/// divisible by `factor`.
template <typename T>
Grid<T> box_downsample(const Grid<T>& src, int factor) {
  if (factor < 1 || src.rows() % factor != 0 || src.cols() % factor != 0) {
    throw InvalidArgument("box_downsample: dimensions must be divisible by the factor");
  }
  if (factor == 1) return src;
  const int rows = src.rows() / factor;
  const int cols = src.cols() / factor;
  const T scale = T(1) / static_cast<T>(factor * factor);
  Grid<T> out(rows, cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      T acc = 0;
      for (int dr = 0; dr < factor; ++dr) {
        for (int dc = 0; dc < factor; ++dc) acc += src(r * factor + dr, c * factor + dc);
      }
      out(r, c) = acc * scale;
    }
  }
  return out;
}

}  // namespace patchtriage
