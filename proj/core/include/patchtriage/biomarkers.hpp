#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "patchtriage/patches.hpp"
#include "patchtriage/stats.hpp"

namespace patchtriage {

/// Intensity statistics in normalized units (pixel / 255); std is the
/// population standard deviation.
struct IntensityStats {
  double mean = 0.0;
  double std = 0.0;
  long long n_pixels = 0;
};

/// Statistics over lung-labelled pixels. Throws NotComputable without lung.
IntensityStats lung_intensity_stats(const RasterImage& img, const LabelMask& mask);

/// Per-patch mean (inter) and std (intra) over non-zero pixels. Patches with
/// no non-zero pixel are skipped and counted in `excluded`.
struct PatchIntensityStats {
  std::vector<double> inter;
  std::vector<double> intra;
  std::size_t excluded = 0;
};

PatchIntensityStats patch_intensity_stats(std::span<const Patch> patches);

/// Optional patch filter, called with a patch and its image's class index.
using PatchFilter = std::function<bool(const Patch&, int)>;

struct MarkerConfig {
  int K = 100;
  int p = 224;
  int q = 224;
  std::uint64_t seed = 0;
  PatchFilter patch_filter;  // empty: every patch counts
};

/// Marker values of one image.
struct ImageMarkers {
  double lung_mean = 0.0;
  double lung_std = 0.0;
  std::optional<double> ctr;  // absent when the mask has no heart
  std::vector<double> inter_patch_means;
  std::vector<double> intra_patch_stds;
  std::size_t excluded_patches = 0;  // empty or rejected by the filter
};

/// `seed` drives the patch centres for this image.
ImageMarkers image_markers(const RasterImage& img, const LabelMask& mask, int class_index, const MarkerConfig& cfg,
                           std::uint64_t seed);

/// Patch seed used by marker_report for one image. Derived from the image
/// and mask content, so identical inputs draw identical patches whatever
/// class or position they are listed under.
std::uint64_t marker_image_seed(std::uint64_t master, const RasterImage& img, const LabelMask& mask);

inline const std::vector<std::string>& marker_names() {
  static const std::vector<std::string> names = {"lung_mean", "lung_std", "ctr", "inter_patch_mean",
                                                 "intra_patch_std"};
  return names;
}

struct PairwiseCell {
  int marker = 0;
  int class_a = 0;
  int class_b = 0;
  TestResult test;
  std::string stars;
};

struct MarkerTable {
  std::vector<std::string> class_names;
  /// values[marker][class]: lung markers hold one value per image; the two
  /// patch markers pool every kept patch of the class.
  std::vector<std::vector<std::vector<double>>> values;
  /// KS normality per [marker][class]; empty when not computable.
  std::vector<std::vector<std::optional<TestResult>>> normality;
  std::vector<PairwiseCell> pairwise;
  std::vector<std::size_t> excluded_patches;  // per class

  const std::vector<double>& marker(const std::string& name, int cls) const;
  const PairwiseCell& cell(const std::string& name, int a, int b) const;
};

struct MarkerClass {
  std::string name;
  std::vector<RasterImage> images;
  std::vector<LabelMask> masks;
};

/// Builds the table from markers already computed per image.
MarkerTable assemble_marker_table(std::span<const std::string> class_names,
                                  std::span<const std::vector<ImageMarkers>> per_class);

/// Computes every marker for every image, then runs KS normality per marker
/// and class, and rank-sum tests for every class pair and marker. Needs at
/// least two classes with three images each.
MarkerTable marker_report(std::span<const MarkerClass> classes, const MarkerConfig& cfg);

nlohmann::json to_json(const MarkerTable& table);

/// Aligned text: one block per marker with per-class mean/std and the
/// pairwise p-values and stars.
std::string marker_text_table(const MarkerTable& table);

}  // namespace patchtriage
