#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "patchtriage/grid.hpp"
#include "patchtriage/params.hpp"
#include "patchtriage/raster.hpp"

namespace patchtriage {

/// Reference patch classifier: box-average pooling of the p x q patch by
/// `pool` and scaling by `input_scale`, then conv 3x3/stride 2/pad 1 -> ReLU -> conv 3x3/stride 2/pad 1 ->
/// ReLU (the Grad-CAM feature layer) -> global average pooling -> linear head.
struct ClassifierSpec {
  int input_height = 224;
  int input_width = 224;
  int pool = 4;
  int conv1_channels = 8;
  int conv2_channels = 16;
  int num_classes = 4;
  double input_scale = 1.0 / 255.0;

  int net_height() const noexcept { return input_height / pool; }
  int net_width() const noexcept { return input_width / pool; }
  void validate() const;
  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

/// k-indexed stack of u x v channels, stored channel-major.
template <typename T>
struct FeatureMaps {
  int channels = 0;
  int height = 0;  // u
  int width = 0;   // v
  std::vector<T> values;

  FeatureMaps() = default;
  FeatureMaps(int k, int u, int v) : channels(k), height(u), width(v), values(static_cast<std::size_t>(k) * u * v) {}

  T& at(int k, int r, int c) { return values[(static_cast<std::size_t>(k) * height + r) * width + c]; }
  T at(int k, int r, int c) const { return values[(static_cast<std::size_t>(k) * height + r) * width + c]; }
  std::span<const T> channel(int k) const {
    return std::span<const T>(values).subspan(static_cast<std::size_t>(k) * height * width,
                                              static_cast<std::size_t>(height) * width);
  }
};

/// Logits and last-layer features plus the intermediates the backward pass
/// needs. A default-constructed value carries no cache.
template <typename T>
struct ClassifierForward {
  std::vector<T> logits;
  FeatureMaps<T> features;
  Grid<T> input;          // pooled network input
  FeatureMaps<T> hidden;  // post-ReLU first conv layer
  std::vector<T> pooled;  // global average of `features`

  bool has_cache() const noexcept { return !input.empty() && !logits.empty(); }
};

/// Objective terms added to the cross-entropy: l1 * sum|w| + l2/2 * sum w^2
/// over weight tensors (biases are exempt).
struct Regularization {
  double l1 = 0.0;
  double l2 = 0.0;
};

template <typename T>
struct ClassifierGradients {
  BasicModelParams<T> params;  // d(objective)/d(theta), same layout as the model
  double loss = 0.0;           // objective value at the forward point
};

template <typename T>
BasicModelParams<T> init_classifier_params(const ClassifierSpec& spec, std::uint64_t seed);

/// Throws InvalidArgument when `params` does not have the layout `spec` implies.
template <typename T>
void check_classifier_params(const BasicModelParams<T>& params, const ClassifierSpec& spec);

template <typename T>
ClassifierForward<T> classifier_forward(const Grid<T>& patch, const BasicModelParams<T>& params,
                                        const ClassifierSpec& spec);

ClassifierForward<float> classifier_forward(const RasterImage& patch, const ModelParams& params,
                                            const ClassifierSpec& spec);

/// Max-subtracted softmax, evaluated in double.
template <typename T>
std::vector<double> softmax(std::span<const T> logits);

/// d(y_c)/d(f_i^k) for every channel k and feature pixel i.
template <typename T>
FeatureMaps<T> class_score_gradient(const ClassifierForward<T>& fwd, const BasicModelParams<T>& params,
                                    const ClassifierSpec& spec, int c);

/// Analytic gradient of cross-entropy(truth) + regularization. Throws
/// PreconditionError if `fwd` carries no cached forward state.
template <typename T>
ClassifierGradients<T> classifier_backward(const ClassifierForward<T>& fwd, int truth,
                                           const BasicModelParams<T>& params, const ClassifierSpec& spec,
                                           const Regularization& reg = {});

/// Objective value only (used by finite-difference checks).
template <typename T>
double classifier_objective(const Grid<T>& patch, int truth, const BasicModelParams<T>& params,
                            const ClassifierSpec& spec, const Regularization& reg = {});

}  // namespace patchtriage
