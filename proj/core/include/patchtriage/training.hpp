#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "patchtriage/infer.hpp"
#include "patchtriage/segmenter.hpp"

namespace patchtriage {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 0.0;
  double l1_coeff = 0.0;
  int batch_size = 16;
  int max_epochs = 30;
  int patience = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A preprocessed image at classification resolution with its anatomy mask
/// and class label.
struct LabeledImage {
  RasterImage image;
  LabelMask mask;
  int label = 0;
};

enum class ClassifierMode { local, global };

struct PatchTrainingConfig {
  int p = 224;
  int q = 224;
  int patches_per_image = 16;  // fresh lung-centred patches per image per epoch
  int validation_K = 100;      // patches per image for validation voting
};

struct ClassifierTrainOptions {
  ClassifierSpec spec;
  TrainConfig train;
  PatchTrainingConfig patches;
  ClassifierMode mode = ClassifierMode::local;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_f1 = 0.0;
};

struct ClassifierTrainingResult {
  ClassifierModel model;  // parameters of the best validation-F1 epoch
  std::vector<EpochRecord> curves;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
};

struct ClassifierScore {
  std::vector<int> predictions;
  double accuracy = 0.0;  // plain accuracy
  double macro_f1 = 0.0;
};

/// Verdicts for every image (majority vote in local mode, argmax of the
/// global pass otherwise). Image i uses patch seed derive_seed(seed, i).
ClassifierScore evaluate_classifier(std::span<const LabeledImage> images, const ClassifierModel& model,
                                    ClassifierMode mode, const PatchTrainingConfig& patches, std::uint64_t seed);

ClassifierTrainingResult train_classifier(std::span<const LabeledImage> train, std::span<const LabeledImage> val,
                                          const ClassifierTrainOptions& options);

/// A preprocessed image at segmentation resolution with its truth labels.
struct SegSample {
  RasterImage image;
  LabelMask truth;
};

struct SegmenterTrainOptions {
  TrainConfig train{.learning_rate = 0.2, .batch_size = 4, .max_epochs = 60, .patience = 8};
  int pixels_per_image = 2048;     // pixels sampled from each image per step
  bool inverse_frequency = false;  // lambda_s from training-label frequencies, else all 1
};

struct SegEpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean weighted cross-entropy per sampled pixel
  double val_jaccard = 0.0;
};

struct SegmenterTrainingResult {
  ModelParams params;
  ClassWeights weights;
  std::vector<SegEpochRecord> curves;
  int best_epoch = 0;
  double best_val_jaccard = 0.0;
};

/// Mean lung Jaccard of the segmenter's predictions against the truth masks.
double mean_lung_jaccard(std::span<const SegSample> samples, const ModelParams& params);

SegmenterTrainingResult train_segmenter(std::span<const SegSample> train, std::span<const SegSample> val,
                                        const SegmenterTrainOptions& options);

nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json curves_json(std::span<const EpochRecord> curves);
nlohmann::json curves_json(std::span<const SegEpochRecord> curves);

}  // namespace patchtriage
