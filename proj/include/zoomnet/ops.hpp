#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "zoomnet/tensor.hpp"

namespace zoomnet {

/// 2-D cross-correlation over an NCHW batch (im2col + GEMM). `weight` is O×C×k×k and
/// `bias` has O entries. Output extent per axis is (H + 2*pad - k) / stride + 1.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 std::size_t stride = 1, std::size_t pad = 0);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

/// x (N×D) · weight (D×M) + bias (M).
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

/// Stacks NC_iHW tensors along the channel axis, in argument order.
template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts);

template <typename T>
Tensor<T> concat_channels(std::initializer_list<Tensor<T>> parts) {
  return concat_channels(std::span<const Tensor<T>>(parts.begin(), parts.size()));
}

/// Channels [begin, end) of an NCHW tensor.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t end);

/// Columns [begin, end) of an N×M tensor.
template <typename T>
Tensor<T> slice_columns(const Tensor<T>& x, std::size_t begin, std::size_t end);

/// N×C×H×W -> N×(C·H·W).
template <typename T>
Tensor<T> flatten(const Tensor<T>& x);

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& x, T factor);

/// Sum of all elements, as a scalar tensor.
template <typename T>
Tensor<T> sum(const Tensor<T>& x);

/// Mean over rows of -log softmax(logits)[target]. Max-subtracted for stability.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::size_t> targets);

/// Softmax of one logit vector on plain values (no graph), used at prediction time.
template <typename T>
std::vector<T> softmax(std::span<const T> logits);

}  // namespace zoomnet
