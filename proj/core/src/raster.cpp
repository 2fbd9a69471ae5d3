#include "patchtriage/raster.hpp"

#include <cmath>
#include <string>

namespace patchtriage {

RasterImage::RasterImage(int height, int width, float fill, IntensityRange range)
    : pixels_(height, width, fill), range_(range) {}

RasterImage::RasterImage(Grid<float> pixels, IntensityRange range)
    : pixels_(std::move(pixels)), range_(range) {}

LabelMask::LabelMask(int height, int width, Anatomy fill)
    : labels_(height, width, static_cast<std::uint8_t>(fill)) {}

LabelMask::LabelMask(Grid<std::uint8_t> labels) : labels_(std::move(labels)) {
  for (std::uint8_t v : labels_.values()) {
    if (v >= kAnatomyCount) {
      throw InvalidArgument("label mask value " + std::to_string(v) + " outside {0,1,2,3}");
    }
  }
}

Grid<std::uint8_t> LabelMask::select(LabelSet labels) const {
  Grid<std::uint8_t> out(height(), width());
  for (std::size_t i = 0; i < labels_.size(); ++i) out[i] = labels.contains(labels_[i]) ? 1 : 0;
  return out;
}

namespace {

void check_target(int out_h, int out_w) {
  if (out_h < 1 || out_w < 1) throw InvalidArgument("resize target dimensions must be >= 1");
}

// Source coordinate of output index i under endpoint alignment.
double endpoint_position(int i, int in_dim, int out_dim) {
  if (out_dim == 1) return 0.5 * (in_dim - 1);
  return static_cast<double>(i) * (in_dim - 1) / (out_dim - 1);
}

struct Tap {
  int lo;
  int hi;
  double frac;
};

std::vector<Tap> bilinear_taps(int in_dim, int out_dim) {
  std::vector<Tap> taps(static_cast<std::size_t>(out_dim));
  for (int i = 0; i < out_dim; ++i) {
    const double pos = endpoint_position(i, in_dim, out_dim);
    int lo = static_cast<int>(std::floor(pos));
    if (lo > in_dim - 1) lo = in_dim - 1;
    const int hi = lo + 1 < in_dim ? lo + 1 : lo;
    taps[static_cast<std::size_t>(i)] = {lo, hi, pos - lo};
  }
  return taps;
}

}  // namespace

RasterImage resize_image(const RasterImage& img, int out_h, int out_w) {
  check_target(out_h, out_w);
  if (img.height() < 1 || img.width() < 1) throw InvalidArgument("resize_image: empty input");
  if (out_h == img.height() && out_w == img.width()) return img;

  const auto row_taps = bilinear_taps(img.height(), out_h);
  const auto col_taps = bilinear_taps(img.width(), out_w);
  RasterImage out(out_h, out_w, 0.0f, img.nominal_range());
  for (int r = 0; r < out_h; ++r) {
    const Tap& ty = row_taps[static_cast<std::size_t>(r)];
    for (int c = 0; c < out_w; ++c) {
      const Tap& tx = col_taps[static_cast<std::size_t>(c)];
      const double a = img(ty.lo, tx.lo);
      const double b = img(ty.lo, tx.hi);
      const double d = img(ty.hi, tx.lo);
      const double e = img(ty.hi, tx.hi);
      // a + f*(b-a) form keeps constant fields exact.
      const double top = a + tx.frac * (b - a);
      const double bottom = d + tx.frac * (e - d);
      out(r, c) = static_cast<float>(top + ty.frac * (bottom - top));
    }
  }
  return out;
}

LabelMask resize_mask(const LabelMask& mask, int out_h, int out_w) {
  check_target(out_h, out_w);
  if (mask.height() < 1 || mask.width() < 1) throw InvalidArgument("resize_mask: empty input");
  if (out_h == mask.height() && out_w == mask.width()) return mask;

  auto nearest = [](int i, int in_dim, int out_dim) {
    const long long src = (2LL * i + 1) * in_dim / (2LL * out_dim);
    return static_cast<int>(src < in_dim ? src : in_dim - 1);
  };
  Grid<std::uint8_t> out(out_h, out_w);
  for (int r = 0; r < out_h; ++r) {
    const int sr = nearest(r, mask.height(), out_h);
    for (int c = 0; c < out_w; ++c) out(r, c) = mask(sr, nearest(c, mask.width(), out_w));
  }
  return LabelMask(std::move(out));
}

RasterImage apply_mask(const RasterImage& img, const LabelMask& mask, LabelSet keep) {
  if (img.height() != mask.height() || img.width() != mask.width()) {
    throw InvalidArgument("apply_mask: image and mask dimensions differ");
  }
  RasterImage out = img;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!keep.contains(mask.grid()[i])) out.grid()[i] = 0.0f;
  }
  return out;
}

RasterImage crop(const RasterImage& img, int top, int left, int p, int q) {
  if (p < 1 || q < 1 || top < 0 || left < 0 || top + p > img.height() || left + q > img.width()) {
    throw InvalidArgument("crop rectangle lies outside the image");
  }
  RasterImage out(p, q, 0.0f, img.nominal_range());
  for (int r = 0; r < p; ++r) {
    for (int c = 0; c < q; ++c) out(r, c) = img(top + r, left + c);
  }
  return out;
}

RasterImage embed(const RasterImage& patch, int top, int left, int m, int n) {
  if (top < 0 || left < 0 || top + patch.height() > m || left + patch.width() > n) {
    throw InvalidArgument("embed placement lies outside the target image");
  }
  RasterImage out(m, n, 0.0f, patch.nominal_range());
  for (int r = 0; r < patch.height(); ++r) {
    for (int c = 0; c < patch.width(); ++c) out(top + r, left + c) = patch(r, c);
  }
  return out;
}

}  // namespace patchtriage
