#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "patchtriage/classifier.hpp"
#include "patchtriage/params.hpp"
#include "patchtriage/raster.hpp"

namespace patchtriage {

/// Per-pixel features: intensity, intensity^2, 3x3 mean, 3x3 std (all
/// scaled by 1/255), centred row and column coordinates y, x in [-1, 1],
/// and y^2, x^2, x*y.
inline constexpr int kSegFeatureCount = 9;

struct SegFeatures {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // pixel-major, kSegFeatureCount per pixel

  std::size_t pixel_count() const noexcept { return static_cast<std::size_t>(height) * width; }
  std::span<const double> at(std::size_t pixel) const {
    return std::span<const double>(values).subspan(pixel * kSegFeatureCount, kSegFeatureCount);
  }
};

SegFeatures segmentation_features(const RasterImage& img);

/// Softmax probabilities for each pixel over the anatomy classes.
struct SegPrediction {
  int height = 0;
  int width = 0;
  int classes = kAnatomyCount;
  std::vector<double> probs;  // pixel-major

  double prob(int r, int c, int s) const {
    return probs[(static_cast<std::size_t>(r) * width + c) * classes + s];
  }
  /// Per-pixel argmax (lowest label on ties).
  LabelMask labels() const;
};

/// Per-class loss weights lambda_s.
struct ClassWeights {
  std::vector<double> lambda;

  static ClassWeights uniform(int classes = kAnatomyCount) {
    return {std::vector<double>(static_cast<std::size_t>(classes), 1.0)};
  }
  void validate() const;
};

/// Inverse pixel frequency of each label over `masks`, normalized to mean 1.
/// Labels that never occur get weight 0.
ClassWeights inverse_frequency_weights(std::span<const LabelMask> masks);

template <typename T>
BasicModelParams<T> init_segmenter_params(std::uint64_t seed);

template <typename T>
SegPrediction segmenter_forward(const SegFeatures& features, const BasicModelParams<T>& params);

/// Weighted cross-entropy -sum_j lambda_{y_j} log p_j[y_j], with
/// probabilities clamped below at 1e-12.
double seg_loss(const SegPrediction& pred, const LabelMask& truth, const ClassWeights& weights);

template <typename T>
struct SegGradients {
  BasicModelParams<T> params;
  double loss = 0.0;
};

/// Loss and analytic gradient over the listed pixel indices (every pixel
/// when `pixels` is empty), plus regularization on the weight matrix.
template <typename T>
SegGradients<T> segmenter_backward(const SegFeatures& features, const LabelMask& truth, const ClassWeights& weights,
                                   const BasicModelParams<T>& params, std::span<const std::size_t> pixels = {},
                                   const Regularization& reg = {});

template <typename T>
double segmenter_objective(const SegFeatures& features, const LabelMask& truth, const ClassWeights& weights,
                           const BasicModelParams<T>& params, std::span<const std::size_t> pixels = {},
                           const Regularization& reg = {});

/// Predicted anatomy mask for a preprocessed image.
LabelMask segment(const RasterImage& img, const ModelParams& params);

}  // namespace patchtriage
