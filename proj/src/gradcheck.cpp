#include "zoomnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace zoomnet {

template <typename T>
double finite_difference_check(const ScalarFn<T>& fn, std::vector<Tensor<T>> inputs, T eps) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.clear_grad();
  }
  auto loss = fn(inputs);
  backward(loss);
  std::vector<std::vector<T>> analytic;
  for (auto& in : inputs) analytic.emplace_back(in.grad().begin(), in.grad().end());

  double worst = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    auto values = inputs[i].values();
    for (std::size_t j = 0; j < values.size(); ++j) {
      const T saved = values[j];
      const T hi = saved + eps, lo = saved - eps;
      values[j] = hi;
      const double up = fn(inputs).item();
      values[j] = lo;
      const double down = fn(inputs).item();
      values[j] = saved;
      const double numeric = (up - down) / (static_cast<double>(hi) - static_cast<double>(lo));
      const double a = analytic[i][j];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

template double finite_difference_check(const ScalarFn<float>&, std::vector<Tensor<float>>, float);
template double finite_difference_check(const ScalarFn<double>&, std::vector<Tensor<double>>, double);

}  // namespace zoomnet
