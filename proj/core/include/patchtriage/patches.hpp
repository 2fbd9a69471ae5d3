#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "patchtriage/raster.hpp"
#include "patchtriage/segmask.hpp"

namespace patchtriage {

/// A p x q crop of the source image.
using Patch = RasterImage;

/// Where a patch sits in its m x n source (the embedding Q_k).
struct PatchPlacement {
  int top = 0;
  int left = 0;
  int p = 0;  // rows
  int q = 0;  // columns
  friend bool operator==(const PatchPlacement&, const PatchPlacement&) = default;
};

/// Per-pixel number of placements covering it (K_i), with K the total count.
struct CoverageMap {
  Grid<int> counts;
  int K = 0;
};

struct PatchSet {
  std::vector<Patch> patches;
  std::vector<PatchPlacement> placements;
};

/// K centres drawn uniformly, with replacement, from the lung pixels.
/// Throws NoLungError if the mask has no lung.
std::vector<PixelCoord> sample_centers(const LabelMask& mask, int K, std::uint64_t seed);

/// p x q rectangle centred on `center` (top = row - p/2), shifted minimally to
/// lie inside the m x n image.
PatchPlacement place_patch(PixelCoord center, int p, int q, int m, int n);

/// Samples K lung-centred placements and crops the corresponding patches.
PatchSet extract_patches(const RasterImage& img, const LabelMask& mask, int K, int p, int q, std::uint64_t seed);

/// Crops patches at previously recorded placements.
std::vector<Patch> crop_patches(const RasterImage& img, std::span<const PatchPlacement> placements);

CoverageMap coverage(std::span<const PatchPlacement> placements, int m, int n);

void to_json(nlohmann::json& j, const PatchPlacement& p);
void from_json(const nlohmann::json& j, PatchPlacement& p);

}  // namespace patchtriage
