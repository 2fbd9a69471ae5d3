#pragma once

#include <cmath>
#include <cstdint>

#include "patchtriage/errors.hpp"
#include "patchtriage/params.hpp"

namespace patchtriage {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates and the step counter.
template <typename T>
struct AdamState {
  BasicModelParams<T> m;
  BasicModelParams<T> v;
  std::int64_t step = 0;

  static AdamState zeros_like(const BasicModelParams<T>& params) {
    return {params.zeros_like(), params.zeros_like(), 0};
  }
};

/// One bias-corrected Adam update in place. Weight decay enters as an
/// additive weight_decay * w on regularized tensors' gradients.
template <typename T>
void adam_step(BasicModelParams<T>& params, const BasicModelParams<T>& grads, AdamState<T>& state,
               double learning_rate, double weight_decay = 0.0, const AdamConfig& cfg = {}) {
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!params.same_layout(grads)) throw InvalidArgument("adam_step: gradient shapes do not match parameters");
  if (state.step == 0 && state.m.tensor_count() == 0) state = AdamState<T>::zeros_like(params);
  if (!params.same_layout(state.m) || !params.same_layout(state.v)) {
    throw InvalidArgument("adam_step: optimizer state shapes do not match parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t t = 0; t < params.tensor_count(); ++t) {
    auto& w = params[t].values;
    const auto& g = grads[t].values;
    auto& m = state.m[t].values;
    auto& v = state.v[t].values;
    const double decay = params[t].regularized ? weight_decay : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]) + decay * static_cast<double>(w[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<T>(mi);
      v[i] = static_cast<T>(vi);
      const double mhat = mi / c1;
      const double vhat = vi / c2;
      w[i] = static_cast<T>(static_cast<double>(w[i]) - learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon));
    }
  }
}

}  // namespace patchtriage
