#include "patchtriage/patches.hpp"

#include <algorithm>

#include "patchtriage/parallel.hpp"
#include "patchtriage/random.hpp"

namespace patchtriage {

std::vector<PixelCoord> sample_centers(const LabelMask& mask, int K, std::uint64_t seed) {
  if (K < 1) throw InvalidArgument("sample_centers: K must be >= 1");
  const auto lung = lung_pixel_coords(mask);
  if (lung.empty()) throw NoLungError("mask contains no lung pixels to sample patch centres from");
  Rng rng(seed);
  std::vector<PixelCoord> centers;
  centers.reserve(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) centers.push_back(lung[rng.below(lung.size())]);
  return centers;
}

PatchPlacement place_patch(PixelCoord center, int p, int q, int m, int n) {
  if (p < 1 || q < 1) throw InvalidArgument("place_patch: patch size must be positive");
  if (p > m || q > n) throw InvalidArgument("place_patch: patch larger than image");
  const int top = std::clamp(center.row - p / 2, 0, m - p);
  const int left = std::clamp(center.col - q / 2, 0, n - q);
  return {top, left, p, q};
}

std::vector<Patch> crop_patches(const RasterImage& img, std::span<const PatchPlacement> placements) {
  std::vector<Patch> out(placements.size());
  parallel_for(placements.size(), [&](std::size_t k) {
    const auto& pl = placements[k];
    out[k] = crop(img, pl.top, pl.left, pl.p, pl.q);
  });
  return out;
}

PatchSet extract_patches(const RasterImage& img, const LabelMask& mask, int K, int p, int q, std::uint64_t seed) {
  if (img.height() != mask.height() || img.width() != mask.width()) {
    throw InvalidArgument("extract_patches: image and mask dimensions differ");
  }
  const auto centers = sample_centers(mask, K, seed);
  PatchSet set;
  set.placements.reserve(centers.size());
  for (const auto& c : centers) set.placements.push_back(place_patch(c, p, q, img.height(), img.width()));
  set.patches = crop_patches(img, set.placements);
  return set;
}

CoverageMap coverage(std::span<const PatchPlacement> placements, int m, int n) {
  CoverageMap cov{Grid<int>(m, n, 0), static_cast<int>(placements.size())};
  for (const auto& pl : placements) {
    if (pl.top < 0 || pl.left < 0 || pl.top + pl.p > m || pl.left + pl.q > n) {
      throw InvalidArgument("coverage: placement outside the image");
    }
    for (int r = pl.top; r < pl.top + pl.p; ++r) {
      int* row = &cov.counts(r, pl.left);
      for (int c = 0; c < pl.q; ++c) ++row[c];
    }
  }
  return cov;
}

void to_json(nlohmann::json& j, const PatchPlacement& p) {
  j = nlohmann::json{{"top", p.top}, {"left", p.left}, {"p", p.p}, {"q", p.q}};
}

void from_json(const nlohmann::json& j, PatchPlacement& p) {
  j.at("top").get_to(p.top);
  j.at("left").get_to(p.left);
  j.at("p").get_to(p.p);
  j.at("q").get_to(p.q);
}

}  // namespace patchtriage
