#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "patchtriage/errors.hpp"

namespace patchtriage {

template <typename T>
struct ParamTensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<T> values;
  /// Weights take L1 and weight decay; biases do not.
  bool regularized = false;
};

/// Ordered collection of named parameter tensors (the parameter set Θ).
/// Shapes are fixed once added.
template <typename T>
class BasicModelParams {
 public:
  ParamTensor<T>& add(std::string name, std::vector<std::size_t> shape, bool regularized, T fill = T{}) {
    const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    tensors_.push_back({std::move(name), std::move(shape), std::vector<T>(n, fill), regularized});
    return tensors_.back();
  }

  std::size_t tensor_count() const noexcept { return tensors_.size(); }
  ParamTensor<T>& operator[](std::size_t i) { return tensors_.at(i); }
  const ParamTensor<T>& operator[](std::size_t i) const { return tensors_.at(i); }

  const ParamTensor<T>& find(const std::string& name) const {
    for (const auto& t : tensors_) {
      if (t.name == name) return t;
    }
    throw InvalidArgument("no parameter tensor named '" + name + "'");
  }
  ParamTensor<T>& find(const std::string& name) {
    return const_cast<ParamTensor<T>&>(static_cast<const BasicModelParams&>(*this).find(name));
  }

  std::size_t value_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.values.size();
    return n;
  }

  /// Same names and shapes, all values zero.
  BasicModelParams zeros_like() const {
    BasicModelParams out;
    for (const auto& t : tensors_) out.add(t.name, t.shape, t.regularized);
    return out;
  }

  bool same_layout(const BasicModelParams& other) const noexcept {
    if (tensors_.size() != other.tensors_.size()) return false;
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      if (tensors_[i].shape != other.tensors_[i].shape) return false;
    }
    return true;
  }

  bool all_finite() const noexcept {
    for (const auto& t : tensors_) {
      for (T v : t.values) {
        if (!std::isfinite(static_cast<double>(v))) return false;
      }
    }
    return true;
  }

  template <typename U>
  BasicModelParams<U> cast() const {
    BasicModelParams<U> out;
    for (const auto& t : tensors_) {
      auto& dst = out.add(t.name, t.shape, t.regularized);
      for (std::size_t i = 0; i < t.values.size(); ++i) dst.values[i] = static_cast<U>(t.values[i]);
    }
    return out;
  }

  /// this += scale * other, tensor by tensor.
  void axpy(T scale, const BasicModelParams& other) {
    if (!same_layout(other)) throw InvalidArgument("parameter layouts differ");
    for (std::size_t i = 0; i < tensors_.size(); ++i) {
      auto& dst = tensors_[i].values;
      const auto& src = other.tensors_[i].values;
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += scale * src[j];
    }
  }

  friend bool operator==(const BasicModelParams& a, const BasicModelParams& b) {
    if (a.tensors_.size() != b.tensors_.size()) return false;
    for (std::size_t i = 0; i < a.tensors_.size(); ++i) {
      const auto& x = a.tensors_[i];
      const auto& y = b.tensors_[i];
      if (x.name != y.name || x.shape != y.shape || x.values != y.values) return false;
    }
    return true;
  }

 private:
  std::vector<ParamTensor<T>> tensors_;
};

using ModelParams = BasicModelParams<float>;

/// Checkpoint layout: `<stem>.bin` holds every tensor's float32 values
/// (little-endian, tensor order); `<stem>.json` is the shape manifest
/// {tensors:[{name, shape, offset, count, regularized}], metadata:{...}}.
void save_params(const ModelParams& params, const std::filesystem::path& stem, const nlohmann::json& metadata = {});

struct LoadedParams {
  ModelParams params;
  nlohmann::json metadata;
};
LoadedParams load_params(const std::filesystem::path& stem);

}  // namespace patchtriage
