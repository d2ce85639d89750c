#pragma once

#include <span>
#include <vector>

#include "zoomnet/tensor.hpp"

namespace zoomnet {

/// Momentum buffers, one per parameter, created on the first step.
template <typename T>
struct SgdState {
  std::vector<std::vector<T>> velocity;
};

/// v <- momentum*v + grad;  p <- p - lr*v;  then grads are zeroed.
template <typename T>
void sgd_step(std::span<Tensor<T>> params, SgdState<T>& state, T lr, T momentum);

}  // namespace zoomnet
