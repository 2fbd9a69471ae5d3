#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "patchtriage/raster.hpp"
#include "patchtriage/segmask.hpp"

namespace patchtriage {

enum class PhantomClass : int { normal = 0, bacterial = 1, tb = 2, viral_covid = 3 };

inline constexpr int kPhantomClassCount = 4;

std::string_view class_name(PhantomClass c);
std::optional<PhantomClass> parse_class(std::string_view name);
const std::vector<std::string>& phantom_class_names();

/// Lesion distribution. For the bacterial class the radii are fractions of
/// the host lung's semi-axes; for the other classes, fractions of the image
/// size. Contrast is added to the raw intensity (negative darkens).
struct LesionParams {
  int count_min = 0;
  int count_max = 0;
  double radius_min = 0.0;
  double radius_max = 0.0;
  double contrast_min = 0.0;
  double contrast_max = 0.0;
  friend bool operator==(const LesionParams&, const LesionParams&) = default;
};

/// Geometry is in fractions of the image size (rows measured from the top).
struct PhantomSpec {
  PhantomClass label = PhantomClass::normal;
  int image_size = 1024;

  double body_row = 0.52;
  double body_semi_rows = 0.47;
  double body_semi_cols = 0.44;
  double lung_row = 0.45;
  double lung_offset = 0.17;  // lung centres at 0.5 -/+ offset
  double lung_semi_rows = 0.20;
  double lung_semi_cols = 0.125;
  double heart_row = 0.57;
  double heart_col = 0.52;
  double heart_semi_rows = 0.12;
  /// Heart width over thoracic width (outer lung extents).
  double ctr_ratio = 0.45;
  double ctr_jitter = 0.03;       // uniform +- on ctr_ratio
  double geometry_jitter = 0.01;  // uniform +- on lung and heart geometry
  double position_jitter = 0.04;  // uniform +- shift of the whole thorax (lungs and heart)

  double air = 20.0;
  double tissue = 150.0;
  double lung = 60.0;
  double heart = 200.0;
  double rib_amplitude = 18.0;
  double rib_period = 0.07;
  double noise_sigma = 4.0;

  LesionParams lesions;
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const PhantomSpec&, const PhantomSpec&) = default;
};

/// Class defaults for the lesion pattern.
PhantomSpec default_phantom_spec(PhantomClass label, int image_size = 1024, std::uint64_t seed = 0);

struct PhantomTruth {
  double ctr = 0.0;  // analytic cardiothoracic ratio after jitter
  MaskStats stats;
  int lesion_count = 0;
  bool lesion_straddles = false;        // some lesion pixel lies outside its lung
  double lesion_lung_fraction = 0.0;    // share of all lung pixels under a lesion
  double air_fraction = 0.0;            // share of pixels darker than any lung pixel
  double lung_fraction = 0.0;
};

/// Expected normalized lung mean after equalization and gamma correction,
/// treating lung ranks as uniform over (air, air + lung]. Meaningful for
/// lesion-free phantoms.
double analytic_lung_mean(const PhantomTruth& truth, double gamma);

struct Phantom {
  IntegerRaster image;  // 8-bit
  LabelMask mask;
  PhantomClass label = PhantomClass::normal;
  PhantomTruth truth;
};

Phantom gen_phantom(const PhantomSpec& spec);

/// n phantoms of one class; item i uses seed derive_seed(seed, i).
std::vector<Phantom> gen_phantom_batch(const PhantomSpec& base, int n, std::uint64_t seed);

enum class Split { train, validation, test };
std::string_view split_name(Split s);

struct SplitCounts {
  int train = 0;
  int validation = 0;
  int test = 0;
};

/// 0.7 / 0.1 / 0.2 with round-half-up on the first two shares.
SplitCounts split_counts(int n);

struct DatasetConfig {
  int n_per_class = 100;
  int image_size = 1024;
  std::uint64_t seed = 0;
  /// One template per class in class order; the seed field is ignored.
  std::vector<PhantomSpec> class_specs;

  static DatasetConfig defaults(int n_per_class, int image_size, std::uint64_t seed);
  void validate() const;
};

struct DatasetItem {
  std::string image_path;  // relative to the dataset directory
  std::string mask_path;
  PhantomClass label = PhantomClass::normal;
  Split split = Split::train;
  std::uint64_t seed = 0;
};

struct DatasetManifest {
  std::vector<DatasetItem> items;
  std::uint64_t seed = 0;
  std::string spec_digest;
};

/// Item order and split membership, without rendering anything.
DatasetManifest plan_dataset(const DatasetConfig& cfg);

/// Renders every phantom into `dir` (images/, masks/, manifest.json).
DatasetManifest gen_dataset(const DatasetConfig& cfg, const std::filesystem::path& dir);

PhantomSpec item_spec(const DatasetConfig& cfg, const DatasetItem& item);

nlohmann::json to_json(const PhantomSpec& spec);
/// Overlays keys present in `j` onto `base`; unknown keys throw InvalidArgument.
PhantomSpec phantom_spec_from_json(const nlohmann::json& j, PhantomSpec base);
nlohmann::json to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const nlohmann::json& j);

}  // namespace patchtriage
