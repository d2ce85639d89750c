#pragma once

#include <functional>
#include <span>
#include <vector>

#include "zoomnet/tensor.hpp"

namespace zoomnet {

template <typename T>
using ScalarFn = std::function<Tensor<T>(std::span<const Tensor<T>>)>;

/// Compares reverse-mode gradients of a scalar function against central
/// differences, coordinate by coordinate over every input. Returns
/// max |analytic - numeric| / max(1, |analytic|).
template <typename T>
double finite_difference_check(const ScalarFn<T>& fn, std::vector<Tensor<T>> inputs, T eps);

}  // namespace zoomnet
