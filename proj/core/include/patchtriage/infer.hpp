#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "patchtriage/classifier.hpp"
#include "patchtriage/patches.hpp"

namespace patchtriage {

struct ClassifierModel {
  ClassifierSpec spec;
  ModelParams params;
};

/// Per-patch class probabilities r^c(x_k), one row per patch.
struct PatchProbs {
  int num_classes = 0;
  std::vector<std::vector<double>> rows;

  std::size_t size() const noexcept { return rows.size(); }
  double at(std::size_t k, int c) const { return rows.at(k).at(static_cast<std::size_t>(c)); }
};

struct Verdict {
  int predicted_class = 0;
  std::vector<int> votes;
  std::vector<double> mean_probs;
};

/// Softmax of the classifier output for each patch, order preserved.
PatchProbs classify_patches(std::span<const Patch> patches, const ClassifierModel& model);

/// Argmax vote per row; ties on the vote count go to the larger summed
/// probability, then to the lowest class index.
Verdict majority_vote(const PatchProbs& probs);

struct ImageClassification {
  Verdict verdict;
  PatchProbs probs;
  std::vector<PatchPlacement> placements;
};

/// Patch-ensemble classification of a preprocessed image. Pixels outside the
/// lung labels are zeroed before cropping.
ImageClassification classify_image(const RasterImage& img, const LabelMask& mask, const ClassifierModel& model, int K,
                                   int p, int q, std::uint64_t seed);

/// Global baseline: the lung-masked image resized to the model input, one
/// forward pass.
std::vector<double> classify_global(const RasterImage& img, const LabelMask& mask, const ClassifierModel& model);

/// Input image for the global baseline.
RasterImage global_input(const RasterImage& img, const LabelMask& mask, const ClassifierSpec& spec);

void to_json(nlohmann::json& j, const Verdict& v);
void to_json(nlohmann::json& j, const PatchProbs& p);
void from_json(const nlohmann::json& j, PatchProbs& p);

}  // namespace patchtriage
