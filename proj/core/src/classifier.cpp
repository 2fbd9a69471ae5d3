#include "patchtriage/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "patchtriage/errors.hpp"
#include "patchtriage/random.hpp"

namespace patchtriage {

namespace {

constexpr int kKernel = 3;

int conv_out(int n) { return (n - 1) / 2 + 1; }

// Output rows i for which input row 2i+d-1 is inside [0, n).
struct Span {
  int lo;
  int hi;  // exclusive
};
Span valid_range(int d, int n, int out) { return {d == 0 ? 1 : 0, std::min(out, (n - d) / 2 + 1)}; }

// out[co] = relu(b[co] + sum_ci w[co,ci] * in[ci]) with stride 2, padding 1.
template <typename T>
void conv_relu_forward(const std::vector<T>& in, int cin, int h, int w, const std::vector<T>& weight,
                       const std::vector<T>& bias, int cout, FeatureMaps<T>& out) {
  const int ho = conv_out(h);
  const int wo = conv_out(w);
  out = FeatureMaps<T>(cout, ho, wo);
  for (int co = 0; co < cout; ++co) {
    T* plane = out.values.data() + static_cast<std::size_t>(co) * ho * wo;
    std::fill(plane, plane + static_cast<std::size_t>(ho) * wo, bias[co]);
    for (int ci = 0; ci < cin; ++ci) {
      const T* src = in.data() + static_cast<std::size_t>(ci) * h * w;
      for (int di = 0; di < kKernel; ++di) {
        const Span rows = valid_range(di, h, ho);
        for (int dj = 0; dj < kKernel; ++dj) {
          const Span cols = valid_range(dj, w, wo);
          const T wv = weight[((static_cast<std::size_t>(co) * cin + ci) * kKernel + di) * kKernel + dj];
          for (int i = rows.lo; i < rows.hi; ++i) {
            const T* s = src + static_cast<std::size_t>(2 * i + di - 1) * w + (dj - 1);
            T* d = plane + static_cast<std::size_t>(i) * wo;
            for (int j = cols.lo; j < cols.hi; ++j) d[j] += wv * s[2 * j];
          }
        }
      }
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(ho) * wo; ++i) plane[i] = std::max(plane[i], T(0));
  }
}

// Accumulates weight/bias gradients from dz (pre-activation gradient) and,
// when din is non-null, the gradient with respect to the layer input.
template <typename T>
void conv_backward(const std::vector<T>& in, int cin, int h, int w, const std::vector<T>& weight,
                   const std::vector<T>& dz, int cout, std::vector<T>& dweight, std::vector<T>& dbias,
                   std::vector<T>* din) {
  const int ho = conv_out(h);
  const int wo = conv_out(w);
  for (int co = 0; co < cout; ++co) {
    const T* g = dz.data() + static_cast<std::size_t>(co) * ho * wo;
    T bsum = 0;
    for (std::size_t i = 0; i < static_cast<std::size_t>(ho) * wo; ++i) bsum += g[i];
    dbias[co] += bsum;
    for (int ci = 0; ci < cin; ++ci) {
      const T* src = in.data() + static_cast<std::size_t>(ci) * h * w;
      T* dsrc = din ? din->data() + static_cast<std::size_t>(ci) * h * w : nullptr;
      for (int di = 0; di < kKernel; ++di) {
        const Span rows = valid_range(di, h, ho);
        for (int dj = 0; dj < kKernel; ++dj) {
          const Span cols = valid_range(dj, w, wo);
          const std::size_t widx = ((static_cast<std::size_t>(co) * cin + ci) * kKernel + di) * kKernel + dj;
          const T wv = weight[widx];
          T acc = 0;
          for (int i = rows.lo; i < rows.hi; ++i) {
            const std::size_t off = static_cast<std::size_t>(2 * i + di - 1) * w + (dj - 1);
            const T* gi = g + static_cast<std::size_t>(i) * wo;
            const T* s = src + off;
            for (int j = cols.lo; j < cols.hi; ++j) acc += gi[j] * s[2 * j];
            if (dsrc) {
              T* ds = dsrc + off;
              for (int j = cols.lo; j < cols.hi; ++j) ds[2 * j] += wv * gi[j];
            }
          }
          dweight[widx] += acc;
        }
      }
    }
  }
}

template <typename T>
void add_regularization(BasicModelParams<T>& grads, const BasicModelParams<T>& params, const Regularization& reg) {
  if (reg.l1 == 0.0 && reg.l2 == 0.0) return;
  for (std::size_t t = 0; t < params.tensor_count(); ++t) {
    if (!params[t].regularized) continue;
    const auto& w = params[t].values;
    auto& g = grads[t].values;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const T sign = w[i] > 0 ? T(1) : (w[i] < 0 ? T(-1) : T(0));
      g[i] += static_cast<T>(reg.l1) * sign + static_cast<T>(reg.l2) * w[i];
    }
  }
}

template <typename T>
double regularization_value(const BasicModelParams<T>& params, const Regularization& reg) {
  if (reg.l1 == 0.0 && reg.l2 == 0.0) return 0.0;
  double l1 = 0.0;
  double l2 = 0.0;
  for (std::size_t t = 0; t < params.tensor_count(); ++t) {
    if (!params[t].regularized) continue;
    for (T v : params[t].values) {
      l1 += std::abs(static_cast<double>(v));
      l2 += static_cast<double>(v) * static_cast<double>(v);
    }
  }
  return reg.l1 * l1 + 0.5 * reg.l2 * l2;
}

double cross_entropy(std::span<const double> logits, int truth) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  double s = 0.0;
  for (double v : logits) s += std::exp(v - mx);
  return mx + std::log(s) - logits[static_cast<std::size_t>(truth)];
}

}  // namespace

void ClassifierSpec::validate() const {
  if (pool < 1) throw InvalidArgument("classifier pool factor must be >= 1");
  if (input_height < 1 || input_width < 1) throw InvalidArgument("classifier input must be non-empty");
  if (input_height % pool != 0 || input_width % pool != 0) {
    throw InvalidArgument("classifier input dims must be divisible by the pool factor");
  }
  if (conv1_channels < 1 || conv2_channels < 1) throw InvalidArgument("classifier channel widths must be >= 1");
  if (num_classes < 2) throw InvalidArgument("classifier needs at least two classes");
  if (!(input_scale > 0.0) || !std::isfinite(input_scale)) throw InvalidArgument("classifier input_scale must be positive");
}

template <typename T>
BasicModelParams<T> init_classifier_params(const ClassifierSpec& spec, std::uint64_t seed) {
  spec.validate();
  const auto c1 = static_cast<std::size_t>(spec.conv1_channels);
  const auto c2 = static_cast<std::size_t>(spec.conv2_channels);
  const auto nc = static_cast<std::size_t>(spec.num_classes);
  BasicModelParams<T> p;
  p.add("conv1.weight", {c1, 1, 3, 3}, true);
  p.add("conv1.bias", {c1}, false);
  p.add("conv2.weight", {c2, c1, 3, 3}, true);
  p.add("conv2.bias", {c2}, false);
  p.add("head.weight", {nc, c2}, true);
  p.add("head.bias", {nc}, false);

  // He-normal for convolutions, Glorot-scaled head; biases start at zero.
  Rng rng(seed);
  auto fill = [&](ParamTensor<T>& t, double sd) {
    for (auto& v : t.values) v = static_cast<T>(sd * rng.normal());
  };
  fill(p[0], std::sqrt(2.0 / 9.0));
  fill(p[2], std::sqrt(2.0 / (9.0 * static_cast<double>(c1))));
  fill(p[4], std::sqrt(1.0 / static_cast<double>(c2)));
  return p;
}

template <typename T>
void check_classifier_params(const BasicModelParams<T>& params, const ClassifierSpec& spec) {
  const auto c1 = static_cast<std::size_t>(spec.conv1_channels);
  const auto c2 = static_cast<std::size_t>(spec.conv2_channels);
  const auto nc = static_cast<std::size_t>(spec.num_classes);
  const std::vector<std::vector<std::size_t>> shapes = {{c1, 1, 3, 3}, {c1}, {c2, c1, 3, 3}, {c2}, {nc, c2}, {nc}};
  if (params.tensor_count() != shapes.size()) throw InvalidArgument("classifier parameters have the wrong tensor count");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params[i].shape != shapes[i]) {
      throw InvalidArgument("classifier parameter '" + params[i].name + "' has the wrong shape");
    }
  }
}

template <typename T>
ClassifierForward<T> classifier_forward(const Grid<T>& patch, const BasicModelParams<T>& params,
                                        const ClassifierSpec& spec) {
  spec.validate();
  check_classifier_params(params, spec);
  if (patch.rows() != spec.input_height || patch.cols() != spec.input_width) {
    throw InvalidArgument("patch is " + std::to_string(patch.rows()) + "x" + std::to_string(patch.cols()) +
                          ", classifier expects " + std::to_string(spec.input_height) + "x" +
                          std::to_string(spec.input_width));
  }
  ClassifierForward<T> f;
  f.input = box_downsample(patch, spec.pool);
  const T scale = static_cast<T>(spec.input_scale);
  for (T& v : f.input.storage()) v *= scale;
  const int h = f.input.rows();
  const int w = f.input.cols();
  conv_relu_forward(f.input.storage(), 1, h, w, params[0].values, params[1].values, spec.conv1_channels, f.hidden);
  conv_relu_forward(f.hidden.values, spec.conv1_channels, f.hidden.height, f.hidden.width, params[2].values,
                    params[3].values, spec.conv2_channels, f.features);

  const std::size_t uv = static_cast<std::size_t>(f.features.height) * f.features.width;
  f.pooled.assign(static_cast<std::size_t>(spec.conv2_channels), T(0));
  for (int k = 0; k < spec.conv2_channels; ++k) {
    T s = 0;
    for (T v : f.features.channel(k)) s += v;
    f.pooled[k] = s / static_cast<T>(uv);
  }
  const auto& hw = params[4].values;
  const auto& hb = params[5].values;
  f.logits.assign(static_cast<std::size_t>(spec.num_classes), T(0));
  for (int c = 0; c < spec.num_classes; ++c) {
    T s = hb[c];
    for (int k = 0; k < spec.conv2_channels; ++k) s += hw[static_cast<std::size_t>(c) * spec.conv2_channels + k] * f.pooled[k];
    f.logits[c] = s;
  }
  return f;
}

ClassifierForward<float> classifier_forward(const RasterImage& patch, const ModelParams& params,
                                            const ClassifierSpec& spec) {
  return classifier_forward(patch.grid(), params, spec);
}

template <typename T>
std::vector<double> softmax(std::span<const T> logits) {
  if (logits.empty()) throw InvalidArgument("softmax of an empty logit vector");
  double mx = static_cast<double>(logits[0]);
  for (T v : logits) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> out(logits.size());
  double s = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(static_cast<double>(logits[i]) - mx);
    s += out[i];
  }
  for (double& v : out) v /= s;
  return out;
}

template <typename T>
FeatureMaps<T> class_score_gradient(const ClassifierForward<T>& fwd, const BasicModelParams<T>& params,
                                    const ClassifierSpec& spec, int c) {
  if (!fwd.has_cache()) throw PreconditionError("class_score_gradient: no cached forward pass");
  if (c < 0 || c >= spec.num_classes) throw InvalidArgument("class index out of range");
  check_classifier_params(params, spec);
  // y_c = b_c + sum_k W[c,k] * mean_i f_i^k, so the gradient is W[c,k]/(u*v).
  FeatureMaps<T> g(fwd.features.channels, fwd.features.height, fwd.features.width);
  const T uv = static_cast<T>(fwd.features.height * fwd.features.width);
  for (int k = 0; k < g.channels; ++k) {
    const T v = params[4].values[static_cast<std::size_t>(c) * spec.conv2_channels + k] / uv;
    std::fill_n(g.values.begin() + static_cast<std::ptrdiff_t>(k) * g.height * g.width, g.height * g.width, v);
  }
  return g;
}

template <typename T>
ClassifierGradients<T> classifier_backward(const ClassifierForward<T>& fwd, int truth,
                                           const BasicModelParams<T>& params, const ClassifierSpec& spec,
                                           const Regularization& reg) {
  if (!fwd.has_cache()) throw PreconditionError("classifier_backward: no cached forward pass");
  if (truth < 0 || truth >= spec.num_classes) throw InvalidArgument("truth class out of range");
  check_classifier_params(params, spec);

  const int nc = spec.num_classes;
  const int c1 = spec.conv1_channels;
  const int c2 = spec.conv2_channels;
  ClassifierGradients<T> out;
  out.params = params.zeros_like();
  auto& g = out.params;

  const std::vector<double> probs = softmax(std::span<const T>(fwd.logits));
  std::vector<double> logits_d(fwd.logits.begin(), fwd.logits.end());
  out.loss = cross_entropy(logits_d, truth) + regularization_value(params, reg);

  std::vector<T> dlogits(static_cast<std::size_t>(nc));
  for (int c = 0; c < nc; ++c) dlogits[c] = static_cast<T>(probs[c] - (c == truth ? 1.0 : 0.0));

  const auto& hw = params[4].values;
  std::vector<T> dpooled(static_cast<std::size_t>(c2), T(0));
  for (int c = 0; c < nc; ++c) {
    g[5].values[c] = dlogits[c];
    for (int k = 0; k < c2; ++k) {
      const std::size_t idx = static_cast<std::size_t>(c) * c2 + k;
      g[4].values[idx] = dlogits[c] * fwd.pooled[k];
      dpooled[k] += dlogits[c] * hw[idx];
    }
  }

  const auto& feat = fwd.features;
  const std::size_t uv = static_cast<std::size_t>(feat.height) * feat.width;
  std::vector<T> dz2(feat.values.size());
  for (int k = 0; k < c2; ++k) {
    const T gk = dpooled[k] / static_cast<T>(uv);
    for (std::size_t i = 0; i < uv; ++i) {
      const std::size_t idx = k * uv + i;
      dz2[idx] = feat.values[idx] > 0 ? gk : T(0);
    }
  }

  const auto& hid = fwd.hidden;
  std::vector<T> dhidden(hid.values.size(), T(0));
  conv_backward(hid.values, c1, hid.height, hid.width, params[2].values, dz2, c2, g[2].values, g[3].values, &dhidden);
  for (std::size_t i = 0; i < dhidden.size(); ++i) {
    if (!(hid.values[i] > 0)) dhidden[i] = 0;
  }
  conv_backward(fwd.input.storage(), 1, fwd.input.rows(), fwd.input.cols(), params[0].values, dhidden, c1,
                g[0].values, g[1].values, static_cast<std::vector<T>*>(nullptr));

  add_regularization(g, params, reg);
  return out;
}

template <typename T>
double classifier_objective(const Grid<T>& patch, int truth, const BasicModelParams<T>& params,
                            const ClassifierSpec& spec, const Regularization& reg) {
  const auto f = classifier_forward(patch, params, spec);
  std::vector<double> logits(f.logits.begin(), f.logits.end());
  return cross_entropy(logits, truth) + regularization_value(params, reg);
}

#define PATCHTRIAGE_INSTANTIATE(T)                                                                            \
  template BasicModelParams<T> init_classifier_params<T>(const ClassifierSpec&, std::uint64_t);               \
  template void check_classifier_params<T>(const BasicModelParams<T>&, const ClassifierSpec&);                \
  template ClassifierForward<T> classifier_forward<T>(const Grid<T>&, const BasicModelParams<T>&,             \
                                                      const ClassifierSpec&);                                 \
  template std::vector<double> softmax<T>(std::span<const T>);                                                \
  template FeatureMaps<T> class_score_gradient<T>(const ClassifierForward<T>&, const BasicModelParams<T>&,    \
                                                  const ClassifierSpec&, int);                                \
  template ClassifierGradients<T> classifier_backward<T>(const ClassifierForward<T>&, int,                    \
                                                         const BasicModelParams<T>&, const ClassifierSpec&,   \
                                                         const Regularization&);                              \
  template double classifier_objective<T>(const Grid<T>&, int, const BasicModelParams<T>&,                    \
                                          const ClassifierSpec&, const Regularization&);

PATCHTRIAGE_INSTANTIATE(float)
PATCHTRIAGE_INSTANTIATE(double)

#undef PATCHTRIAGE_INSTANTIATE

}  // namespace patchtriage
