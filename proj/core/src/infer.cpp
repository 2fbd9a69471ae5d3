#include "patchtriage/infer.hpp"

#include <algorithm>

#include "patchtriage/errors.hpp"
#include "patchtriage/parallel.hpp"

namespace patchtriage {

PatchProbs classify_patches(std::span<const Patch> patches, const ClassifierModel& model) {
  if (patches.empty()) throw InvalidArgument("classify_patches: no patches");
  model.spec.validate();
  check_classifier_params(model.params, model.spec);
  PatchProbs out;
  out.num_classes = model.spec.num_classes;
  out.rows.resize(patches.size());
  parallel_for(patches.size(), [&](std::size_t k) {
    const auto f = classifier_forward(patches[k], model.params, model.spec);
    out.rows[k] = softmax(std::span<const float>(f.logits));
  });
  return out;
}

Verdict majority_vote(const PatchProbs& probs) {
  if (probs.rows.empty()) throw InvalidArgument("majority_vote: no patches");
  const int nc = probs.num_classes;
  if (nc < 1) throw InvalidArgument("majority_vote: no classes");
  Verdict v;
  v.votes.assign(static_cast<std::size_t>(nc), 0);
  std::vector<double> sums(static_cast<std::size_t>(nc), 0.0);
  for (const auto& row : probs.rows) {
    if (row.size() != static_cast<std::size_t>(nc)) throw InvalidArgument("majority_vote: ragged probability rows");
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    ++v.votes[static_cast<std::size_t>(best)];
    for (int c = 0; c < nc; ++c) sums[c] += row[c];
  }
  int best = 0;
  for (int c = 1; c < nc; ++c) {
    if (v.votes[c] > v.votes[best] || (v.votes[c] == v.votes[best] && sums[c] > sums[best])) best = c;
  }
  v.predicted_class = best;
  v.mean_probs.resize(sums.size());
  for (std::size_t c = 0; c < sums.size(); ++c) v.mean_probs[c] = sums[c] / static_cast<double>(probs.rows.size());
  return v;
}

ImageClassification classify_image(const RasterImage& img, const LabelMask& mask, const ClassifierModel& model, int K,
                                   int p, int q, std::uint64_t seed) {
  const RasterImage masked = apply_mask(img, mask, LabelSet::lungs());
  PatchSet set = extract_patches(masked, mask, K, p, q, seed);
  ImageClassification out;
  out.probs = classify_patches(set.patches, model);
  out.verdict = majority_vote(out.probs);
  out.placements = std::move(set.placements);
  return out;
}

RasterImage global_input(const RasterImage& img, const LabelMask& mask, const ClassifierSpec& spec) {
  const RasterImage masked = apply_mask(img, mask, LabelSet::lungs());
  return resize_image(masked, spec.input_height, spec.input_width);
}

std::vector<double> classify_global(const RasterImage& img, const LabelMask& mask, const ClassifierModel& model) {
  const auto f = classifier_forward(global_input(img, mask, model.spec), model.params, model.spec);
  return softmax(std::span<const float>(f.logits));
}

void to_json(nlohmann::json& j, const Verdict& v) {
  j = nlohmann::json{{"prediction", v.predicted_class}, {"votes", v.votes}, {"mean_probs", v.mean_probs}};
}

void to_json(nlohmann::json& j, const PatchProbs& p) {
  j = nlohmann::json{{"num_classes", p.num_classes}, {"rows", p.rows}};
}

void from_json(const nlohmann::json& j, PatchProbs& p) {
  p.num_classes = j.at("num_classes").get<int>();
  p.rows = j.at("rows").get<std::vector<std::vector<double>>>();
}

}  // namespace patchtriage
