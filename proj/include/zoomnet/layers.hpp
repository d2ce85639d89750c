#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "zoomnet/ops.hpp"
#include "zoomnet/rng.hpp"
#include "zoomnet/tensor.hpp"

namespace zoomnet {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

/// He-uniform weights (bound sqrt(6 / fan_in)) and zero bias.
template <typename T>
Tensor<T> he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(rng.uniform(-bound, bound));
  return Tensor<T>(std::move(shape), std::move(v), true);
}

/// k×k convolution followed by ReLU; same-padding when stride is 1.
template <typename T>
struct ConvLayer {
  Tensor<T> weight;
  Tensor<T> bias;
  std::size_t stride = 1;

  ConvLayer() = default;
  ConvLayer(std::size_t in, std::size_t out, std::size_t k, std::size_t stride_, Rng& rng)
      : weight(he_uniform<T>({out, in, k, k}, in * k * k, rng)), bias(Shape{out}, T(0), true), stride(stride_) {}

  std::size_t in_channels() const { return weight.dim(1); }
  std::size_t out_channels() const { return weight.dim(0); }
  std::size_t kernel() const { return weight.dim(2); }

  Tensor<T> conv(const Tensor<T>& x) const { return conv2d(x, weight, bias, stride, kernel() / 2); }
  Tensor<T> operator()(const Tensor<T>& x) const { return relu(conv(x)); }

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

template <typename T>
struct LinearLayer {
  Tensor<T> weight;  // D×M
  Tensor<T> bias;    // M

  LinearLayer() = default;
  LinearLayer(std::size_t in, std::size_t out, Rng& rng)
      : weight(he_uniform<T>({in, out}, in, rng)), bias(Shape{out}, T(0), true) {}

  Tensor<T> operator()(const Tensor<T>& x) const { return linear(x, weight, bias); }

  void collect(const std::string& prefix, std::vector<NamedParam<T>>& out) const {
    out.push_back({prefix + ".weight", weight});
    out.push_back({prefix + ".bias", bias});
  }
};

}  // namespace zoomnet
