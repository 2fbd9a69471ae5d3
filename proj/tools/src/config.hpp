#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "patchtriage/classifier.hpp"
#include "patchtriage/phantom.hpp"
#include "patchtriage/preprocess.hpp"
#include "patchtriage/training.hpp"

namespace patchtriage::cli {

/// Bad flags, malformed or unknown config keys; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PreprocessBlock {
  double gamma = 0.5;
  int gray_levels = 256;
  int segmentation_size = 256;
  int classification_size = 1024;

  PreprocessConfig for_size(int size) const { return {gamma, gray_levels, size}; }
};

struct PatchBlock {
  int K = 100;
  int p = 224;
  int q = 224;
};

struct ModelBlock {
  int pool = 4;
  int conv1_channels = 8;
  int conv2_channels = 16;
};

struct TrainBlock {
  TrainConfig train;
  int patches_per_image = 16;
  int validation_K = 100;
  ClassifierMode mode = ClassifierMode::local;
};

struct SegmenterBlock {
  SegmenterTrainOptions options;
  std::vector<PhantomClass> train_classes = {PhantomClass::normal, PhantomClass::tb, PhantomClass::viral_covid};
};

struct PhantomBlock {
  int n_per_class = 100;
  int image_size = 1024;
  std::vector<PhantomSpec> class_specs;  // resolved, one per class
};

/// Every knob a run can set. Missing blocks and keys take the defaults;
/// unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 0;
  PreprocessBlock preprocess;
  PatchBlock patches;
  ModelBlock model;
  TrainBlock train;
  SegmenterBlock segmenter;
  PhantomBlock phantom;

  ClassifierSpec classifier_spec() const;
  DatasetConfig dataset_config() const;
  void validate() const;
};

RunConfig default_config();
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace patchtriage::cli
