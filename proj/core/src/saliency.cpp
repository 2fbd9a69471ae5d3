#include "patchtriage/saliency.hpp"

#include <algorithm>

#include "patchtriage/errors.hpp"
#include "patchtriage/parallel.hpp"

namespace patchtriage {

ChannelWeights channel_weights(const FeatureMaps<float>& score_gradient) {
  ChannelWeights w;
  w.Z = score_gradient.height * score_gradient.width;
  if (w.Z == 0) throw InvalidArgument("channel_weights: empty feature maps");
  w.alpha.resize(static_cast<std::size_t>(score_gradient.channels));
  for (int k = 0; k < score_gradient.channels; ++k) {
    double s = 0.0;
    for (float v : score_gradient.channel(k)) s += v;
    w.alpha[k] = s / w.Z;
  }
  return w;
}

SaliencyMap grad_cam_from_features(const FeatureMaps<float>& features, const ChannelWeights& weights, int p, int q) {
  if (weights.alpha.size() != static_cast<std::size_t>(features.channels)) {
    throw InvalidArgument("grad_cam: one channel weight per feature channel required");
  }
  if (p < 1 || q < 1) throw InvalidArgument("grad_cam: output size must be positive");
  Grid<float> cam(features.height, features.width);
  for (int r = 0; r < features.height; ++r) {
    for (int c = 0; c < features.width; ++c) {
      double s = 0.0;
      for (int k = 0; k < features.channels; ++k) s += weights.alpha[k] * features.at(k, r, c);
      cam(r, c) = static_cast<float>(std::max(s, 0.0));
    }
  }
  Grid<float> up = resize_image(RasterImage(std::move(cam)), p, q).grid();
  const float mx = *std::max_element(up.storage().begin(), up.storage().end());
  if (mx > 0.0f) {
    for (float& v : up.storage()) v = std::clamp(v / mx, 0.0f, 1.0f);
  }
  return up;
}

SaliencyMap grad_cam(const Patch& patch, const ClassifierModel& model, int c) {
  if (c < 0 || c >= model.spec.num_classes) throw InvalidArgument("grad_cam: class index out of range");
  const auto fwd = classifier_forward(patch, model.params, model.spec);
  const auto weights = channel_weights(class_score_gradient(fwd, model.params, model.spec, c));
  return grad_cam_from_features(fwd.features, weights, patch.height(), patch.width());
}

SaliencyMap prob_grad_cam(std::span<const SaliencyMap> patch_maps, const PatchProbs& probs,
                          std::span<const PatchPlacement> placements, const CoverageMap& coverage, int c) {
  const std::size_t K = patch_maps.size();
  if (probs.size() != K || placements.size() != K) {
    throw InvalidArgument("prob_grad_cam: maps, probabilities and placements must be index-aligned");
  }
  if (coverage.K != static_cast<int>(K)) throw InvalidArgument("prob_grad_cam: coverage was computed for another ensemble");
  if (c < 0 || c >= probs.num_classes) throw InvalidArgument("prob_grad_cam: class index out of range");
  const int m = coverage.counts.rows();
  const int n = coverage.counts.cols();
  // Summing in a canonical patch order makes the floating-point result
  // independent of how the ensemble is listed.
  std::vector<std::size_t> order(K);
  for (std::size_t k = 0; k < K; ++k) order[k] = k;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& pa = placements[a];
    const auto& pb = placements[b];
    if (pa.top != pb.top) return pa.top < pb.top;
    if (pa.left != pb.left) return pa.left < pb.left;
    if (pa.p != pb.p) return pa.p < pb.p;
    if (pa.q != pb.q) return pa.q < pb.q;
    const double ra = probs.at(a, c);
    const double rb = probs.at(b, c);
    if (ra != rb) return ra < rb;
    return std::lexicographical_compare(patch_maps[a].storage().begin(), patch_maps[a].storage().end(),
                                        patch_maps[b].storage().begin(), patch_maps[b].storage().end());
  });
  Grid<double> acc(m, n, 0.0);
  for (std::size_t k : order) {
    const auto& pl = placements[k];
    const auto& map = patch_maps[k];
    if (map.rows() != pl.p || map.cols() != pl.q) throw InvalidArgument("prob_grad_cam: map size differs from its placement");
    if (pl.top < 0 || pl.left < 0 || pl.top + pl.p > m || pl.left + pl.q > n) {
      throw InvalidArgument("prob_grad_cam: placement outside the image");
    }
    const double r = probs.at(k, c);
    for (int i = 0; i < pl.p; ++i) {
      for (int j = 0; j < pl.q; ++j) acc(pl.top + i, pl.left + j) += r * map(i, j);
    }
  }
  SaliencyMap out(m, n, 0.0f);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int ki = coverage.counts[i];
    if (ki > 0) out[i] = static_cast<float>(std::clamp(acc[i] / ki, 0.0, 1.0));
  }
  return out;
}

RasterImage saliency_overlay(const RasterImage& img, const SaliencyMap& map) {
  if (img.height() != map.rows() || img.width() != map.cols()) throw InvalidArgument("overlay: size mismatch");
  RasterImage out(img.height(), img.width(), 0.0f, {0.0f, 255.0f});
  for (std::size_t i = 0; i < map.size(); ++i) {
    out.pixels()[i] = 0.5f * std::clamp(img.pixels()[i], 0.0f, 255.0f) + 127.5f * map[i];
  }
  return out;
}

}  // namespace patchtriage
