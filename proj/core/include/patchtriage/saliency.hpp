#pragma once

#include <span>
#include <vector>

#include "patchtriage/infer.hpp"
#include "patchtriage/patches.hpp"

namespace patchtriage {

/// alpha_k^c for each feature channel, with the scaling count Z = u*v.
struct ChannelWeights {
  std::vector<double> alpha;
  int Z = 0;
};

/// Patch-level (p x q) or image-level (m x n) saliency values in [0, 1].
using SaliencyMap = Grid<float>;

ChannelWeights channel_weights(const FeatureMaps<float>& score_gradient);

/// ReLU(sum_k alpha_k f^k), bilinearly upsampled to p x q and divided by its
/// maximum. An all-zero map stays zero.
SaliencyMap grad_cam_from_features(const FeatureMaps<float>& features, const ChannelWeights& weights, int p, int q);

SaliencyMap grad_cam(const Patch& patch, const ClassifierModel& model, int c);

/// Probability-weighted average of the embedded patch maps:
/// out_i = (1/K_i) sum_k r^c(x_k) [Q_k l^c(x_k)]_i, zero where K_i = 0.
SaliencyMap prob_grad_cam(std::span<const SaliencyMap> patch_maps, const PatchProbs& probs,
                          std::span<const PatchPlacement> placements, const CoverageMap& coverage, int c);

/// Grayscale composite 0.5*image + 0.5*255*map, for quick visual checks.
RasterImage saliency_overlay(const RasterImage& img, const SaliencyMap& map);

}  // namespace patchtriage
