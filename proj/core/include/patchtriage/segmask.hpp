#pragma once

#include <vector>

#include "patchtriage/raster.hpp"

namespace patchtriage {

struct PixelCoord {
  int row = 0;
  int col = 0;
  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Geometry summary of an anatomy mask. Widths are maximal per-row spans.
struct MaskStats {
  long long lung_area = 0;
  long long heart_area = 0;
  int cardiac_width = 0;
  int thoracic_width = 0;
};

/// |a ∩ b| / |a ∪ b|; two empty masks score 1.
double jaccard(const BinaryMask& a, const BinaryMask& b);

MaskStats mask_stats(const LabelMask& mask);

/// Cardiothoracic ratio: widest per-row heart span over the widest per-row
/// span from the leftmost to the rightmost lung pixel (mediastinum included).
/// Throws NotComputable if heart or lung labels are missing.
double ctr(const LabelMask& mask);

/// Fraction of reference pixels absent from the prediction.
double lung_deficit_fraction(const BinaryMask& predicted, const BinaryMask& reference);

/// True iff more than a quarter of the reference lung is missing from the
/// prediction.
bool under_segmentation_flag(const BinaryMask& predicted, const BinaryMask& reference);

/// Row-major coordinates of every left- or right-lung pixel.
std::vector<PixelCoord> lung_pixel_coords(const LabelMask& mask);

}  // namespace patchtriage
