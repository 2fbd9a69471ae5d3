#include "patchtriage/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patchtriage/errors.hpp"
#include "patchtriage/random.hpp"

namespace patchtriage {

namespace {

constexpr double kProbFloor = 1e-12;

template <typename T>
void check_params(const BasicModelParams<T>& params) {
  if (params.tensor_count() != 2 ||
      params[0].shape != std::vector<std::size_t>{kAnatomyCount, kSegFeatureCount} ||
      params[1].shape != std::vector<std::size_t>{kAnatomyCount}) {
    throw InvalidArgument("segmenter parameters have the wrong layout");
  }
}

template <typename T>
void pixel_probs(std::span<const double> x, const BasicModelParams<T>& params, double* out) {
  const auto& w = params[0].values;
  const auto& b = params[1].values;
  double mx = -INFINITY;
  for (int s = 0; s < kAnatomyCount; ++s) {
    double z = static_cast<double>(b[s]);
    for (int f = 0; f < kSegFeatureCount; ++f) z += static_cast<double>(w[s * kSegFeatureCount + f]) * x[f];
    out[s] = z;
    mx = std::max(mx, z);
  }
  double sum = 0.0;
  for (int s = 0; s < kAnatomyCount; ++s) {
    out[s] = std::exp(out[s] - mx);
    sum += out[s];
  }
  for (int s = 0; s < kAnatomyCount; ++s) out[s] /= sum;
}

void check_truth(const SegFeatures& features, const LabelMask& truth, const ClassWeights& weights) {
  if (truth.height() != features.height || truth.width() != features.width) {
    throw InvalidArgument("segmentation truth and features differ in size");
  }
  weights.validate();
  if (weights.lambda.size() != static_cast<std::size_t>(kAnatomyCount)) {
    throw InvalidArgument("class weights must have one entry per anatomy label");
  }
}

template <typename T>
double weight_penalty(const BasicModelParams<T>& params, const Regularization& reg) {
  double l1 = 0.0;
  double l2 = 0.0;
  for (T v : params[0].values) {
    l1 += std::abs(static_cast<double>(v));
    l2 += static_cast<double>(v) * static_cast<double>(v);
  }
  return reg.l1 * l1 + 0.5 * reg.l2 * l2;
}

}  // namespace

SegFeatures segmentation_features(const RasterImage& img) {
  if (img.size() == 0) throw InvalidArgument("segmentation_features: empty image");
  const int h = img.height();
  const int w = img.width();
  SegFeatures f;
  f.height = h;
  f.width = w;
  f.values.resize(static_cast<std::size_t>(h) * w * kSegFeatureCount);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double s = 0.0;
      double s2 = 0.0;
      int n = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          const double v = img(rr, cc) / 255.0;
          s += v;
          s2 += v * v;
          ++n;
        }
      }
      const double mean = s / n;
      const double var = std::max(0.0, s2 / n - mean * mean);
      const double v = img(r, c) / 255.0;
      const double y = 2.0 * (r + 0.5) / h - 1.0;
      const double x = 2.0 * (c + 0.5) / w - 1.0;
      double* out = f.values.data() + (static_cast<std::size_t>(r) * w + c) * kSegFeatureCount;
      out[0] = v;
      out[1] = v * v;
      out[2] = mean;
      out[3] = std::sqrt(var);
      out[4] = y;
      out[5] = x;
      out[6] = y * y;
      out[7] = x * x;
      out[8] = x * y;
    }
  }
  return f;
}

LabelMask SegPrediction::labels() const {
  Grid<std::uint8_t> g(height, width);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double* p = probs.data() + i * classes;
    g[i] = static_cast<std::uint8_t>(std::max_element(p, p + classes) - p);
  }
  return LabelMask(std::move(g));
}

void ClassWeights::validate() const {
  if (lambda.empty()) throw InvalidArgument("class weights are empty");
  bool any = false;
  for (double v : lambda) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("class weights must be finite and non-negative");
    any = any || v > 0.0;
  }
  if (!any) throw InvalidArgument("class weights are all zero");
}

ClassWeights inverse_frequency_weights(std::span<const LabelMask> masks) {
  std::vector<double> counts(kAnatomyCount, 0.0);
  for (const auto& m : masks) {
    for (std::uint8_t v : m.grid().values()) counts[v] += 1.0;
  }
  ClassWeights w;
  w.lambda.assign(kAnatomyCount, 0.0);
  double sum = 0.0;
  for (int s = 0; s < kAnatomyCount; ++s) {
    if (counts[s] > 0) w.lambda[s] = 1.0 / counts[s];
    sum += w.lambda[s];
  }
  if (sum == 0.0) throw InvalidArgument("inverse_frequency_weights: no labeled pixels");
  for (double& v : w.lambda) v *= kAnatomyCount / sum;
  return w;
}

template <typename T>
BasicModelParams<T> init_segmenter_params(std::uint64_t seed) {
  BasicModelParams<T> p;
  auto& w = p.add("seg.weight", {kAnatomyCount, kSegFeatureCount}, true);
  p.add("seg.bias", {kAnatomyCount}, false);
  Rng rng(seed);
  for (auto& v : w.values) v = static_cast<T>(0.01 * rng.normal());
  return p;
}

template <typename T>
SegPrediction segmenter_forward(const SegFeatures& features, const BasicModelParams<T>& params) {
  check_params(params);
  SegPrediction out;
  out.height = features.height;
  out.width = features.width;
  out.probs.resize(features.pixel_count() * kAnatomyCount);
  for (std::size_t j = 0; j < features.pixel_count(); ++j) {
    pixel_probs(features.at(j), params, out.probs.data() + j * kAnatomyCount);
  }
  return out;
}

double seg_loss(const SegPrediction& pred, const LabelMask& truth, const ClassWeights& weights) {
  if (truth.height() != pred.height || truth.width() != pred.width) {
    throw InvalidArgument("seg_loss: prediction and truth differ in size");
  }
  weights.validate();
  if (weights.lambda.size() != static_cast<std::size_t>(pred.classes)) {
    throw InvalidArgument("seg_loss: one weight per class required");
  }
  double loss = 0.0;
  const auto labels = truth.grid().values();
  for (std::size_t j = 0; j < labels.size(); ++j) {
    const int y = labels[j];
    if (y >= pred.classes) throw InvalidArgument("seg_loss: truth label outside the class set");
    const double p = pred.probs[j * pred.classes + y];
    loss -= weights.lambda[y] * std::log(std::max(p, kProbFloor));
  }
  return loss;
}

template <typename T>
SegGradients<T> segmenter_backward(const SegFeatures& features, const LabelMask& truth, const ClassWeights& weights,
                                   const BasicModelParams<T>& params, std::span<const std::size_t> pixels,
                                   const Regularization& reg) {
  check_params(params);
  check_truth(features, truth, weights);
  SegGradients<T> out;
  out.params = params.zeros_like();
  std::vector<double> gw(kAnatomyCount * kSegFeatureCount, 0.0);
  std::vector<double> gb(kAnatomyCount, 0.0);
  const auto labels = truth.grid().values();
  const std::size_t n = pixels.empty() ? features.pixel_count() : pixels.size();
  double p[kAnatomyCount];
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = pixels.empty() ? i : pixels[i];
    if (j >= features.pixel_count()) throw InvalidArgument("segmenter_backward: pixel index out of range");
    const auto x = features.at(j);
    pixel_probs(x, params, p);
    const int y = labels[j];
    const double lam = weights.lambda[y];
    loss -= lam * std::log(std::max(p[y], kProbFloor));
    if (lam == 0.0 || p[y] < kProbFloor) continue;  // clamped region has zero slope
    for (int s = 0; s < kAnatomyCount; ++s) {
      const double dz = lam * (p[s] - (s == y ? 1.0 : 0.0));
      gb[s] += dz;
      for (int f = 0; f < kSegFeatureCount; ++f) gw[s * kSegFeatureCount + f] += dz * x[f];
    }
  }
  const auto& w = params[0].values;
  for (std::size_t i = 0; i < gw.size(); ++i) {
    const double wi = static_cast<double>(w[i]);
    const double sign = wi > 0 ? 1.0 : (wi < 0 ? -1.0 : 0.0);
    out.params[0].values[i] = static_cast<T>(gw[i] + reg.l1 * sign + reg.l2 * wi);
  }
  for (int s = 0; s < kAnatomyCount; ++s) out.params[1].values[s] = static_cast<T>(gb[s]);
  out.loss = loss + weight_penalty(params, reg);
  return out;
}

template <typename T>
double segmenter_objective(const SegFeatures& features, const LabelMask& truth, const ClassWeights& weights,
                           const BasicModelParams<T>& params, std::span<const std::size_t> pixels,
                           const Regularization& reg) {
  check_params(params);
  check_truth(features, truth, weights);
  const auto labels = truth.grid().values();
  const std::size_t n = pixels.empty() ? features.pixel_count() : pixels.size();
  double p[kAnatomyCount];
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = pixels.empty() ? i : pixels[i];
    pixel_probs(features.at(j), params, p);
    const int y = labels[j];
    loss -= weights.lambda[y] * std::log(std::max(p[y], kProbFloor));
  }
  return loss + weight_penalty(params, reg);
}

LabelMask segment(const RasterImage& img, const ModelParams& params) {
  return segmenter_forward(segmentation_features(img), params).labels();
}

#define PATCHTRIAGE_INSTANTIATE(T)                                                                            \
  template BasicModelParams<T> init_segmenter_params<T>(std::uint64_t);                                       \
  template SegPrediction segmenter_forward<T>(const SegFeatures&, const BasicModelParams<T>&);                \
  template SegGradients<T> segmenter_backward<T>(const SegFeatures&, const LabelMask&, const ClassWeights&,   \
                                                 const BasicModelParams<T>&, std::span<const std::size_t>,    \
                                                 const Regularization&);                                      \
  template double segmenter_objective<T>(const SegFeatures&, const LabelMask&, const ClassWeights&,           \
                                         const BasicModelParams<T>&, std::span<const std::size_t>,            \
                                         const Regularization&);

PATCHTRIAGE_INSTANTIATE(float)
PATCHTRIAGE_INSTANTIATE(double)

#undef PATCHTRIAGE_INSTANTIATE

}  // namespace patchtriage
