#include "zoomnet/optim.hpp"

#include <string>

namespace zoomnet {

template <typename T>
void sgd_step(std::span<Tensor<T>> params, SgdState<T>& state, T lr, T momentum) {
  if (state.velocity.empty()) {
    state.velocity.reserve(params.size());
    for (const auto& p : params) state.velocity.emplace_back(p.numel(), T(0));
  }
  if (state.velocity.size() != params.size()) {
    throw ContractError("sgd_step: optimizer state holds " + std::to_string(state.velocity.size()) +
                        " buffers for " + std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].has_grad()) throw ContractError("sgd_step: parameter " + std::to_string(i) + " has no gradient");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto values = params[i].values();
    auto grad = params[i].grad();
    auto& v = state.velocity[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      v[j] = momentum * v[j] + grad[j];
      values[j] -= lr * v[j];
    }
    params[i].zero_grad();
  }
}

template void sgd_step(std::span<Tensor<float>>, SgdState<float>&, float, float);
template void sgd_step(std::span<Tensor<double>>, SgdState<double>&, double, double);

}  // namespace zoomnet
