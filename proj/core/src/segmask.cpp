#include "patchtriage/segmask.hpp"

#include <algorithm>

namespace patchtriage {

namespace {

void require_same_shape(const BinaryMask& a, const BinaryMask& b, const char* what) {
  if (!a.same_shape(b)) throw InvalidArgument(std::string(what) + ": mask dimensions differ");
}

}  // namespace

double jaccard(const BinaryMask& a, const BinaryMask& b) {
  require_same_shape(a, b, "jaccard");
  long long inter = 0;
  long long uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MaskStats mask_stats(const LabelMask& mask) {
  MaskStats s;
  for (int r = 0; r < mask.height(); ++r) {
    int heart_lo = -1, heart_hi = -1, lung_lo = -1, lung_hi = -1;
    for (int c = 0; c < mask.width(); ++c) {
      const std::uint8_t v = mask(r, c);
      if (v == static_cast<std::uint8_t>(Anatomy::heart)) {
        ++s.heart_area;
        if (heart_lo < 0) heart_lo = c;
        heart_hi = c;
      } else if (is_lung_label(v)) {
        ++s.lung_area;
        if (lung_lo < 0) lung_lo = c;
        lung_hi = c;
      }
    }
    if (heart_lo >= 0) s.cardiac_width = std::max(s.cardiac_width, heart_hi - heart_lo + 1);
    if (lung_lo >= 0) s.thoracic_width = std::max(s.thoracic_width, lung_hi - lung_lo + 1);
  }
  return s;
}

double ctr(const LabelMask& mask) {
  const MaskStats s = mask_stats(mask);
  if (s.heart_area == 0) throw NotComputable("ctr: mask has no heart pixels");
  if (s.lung_area == 0) throw NotComputable("ctr: mask has no lung pixels");
  return static_cast<double>(s.cardiac_width) / static_cast<double>(s.thoracic_width);
}

double lung_deficit_fraction(const BinaryMask& predicted, const BinaryMask& reference) {
  require_same_shape(predicted, reference, "under_segmentation_flag");
  long long ref = 0;
  long long missing = 0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (reference[i] == 0) continue;
    ++ref;
    if (predicted[i] == 0) ++missing;
  }
  if (ref == 0) throw InvalidArgument("under_segmentation_flag: reference lung mask is empty");
  return static_cast<double>(missing) / static_cast<double>(ref);
}

bool under_segmentation_flag(const BinaryMask& predicted, const BinaryMask& reference) {
  return lung_deficit_fraction(predicted, reference) > 0.25;
}

std::vector<PixelCoord> lung_pixel_coords(const LabelMask& mask) {
  std::vector<PixelCoord> out;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (is_lung_label(mask(r, c))) out.push_back({r, c});
    }
  }
  return out;
}

}  // namespace patchtriage
