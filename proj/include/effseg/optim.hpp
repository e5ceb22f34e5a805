#pragma once

#include "effseg/tensor.hpp"

#include <vector>

namespace effseg {

template <typename Scalar>
struct OptimizerState {
  std::vector<Vector<Scalar>> velocity;  // one per parameter, zero-initialized
  Scalar momentum = Scalar(0.99);
  Scalar lr = Scalar(0.01);

  OptimizerState() = default;
  OptimizerState(const std::vector<Tensor<Scalar>>& params, Scalar momentum_, Scalar lr_)
      : momentum(momentum_), lr(lr_) {
    velocity.reserve(params.size());
    for (const auto& p : params) velocity.push_back(Vector<Scalar>::Zero(p.size()));
  }
};

/// Nesterov SGD:  v <- mu*v + g ;  theta <- theta - lr*(g + mu*v).
template <typename Scalar>
void sgd_nesterov_step(std::vector<Tensor<Scalar>>& params, const std::vector<Tensor<Scalar>>& grads,
                       OptimizerState<Scalar>& state) {
  if (grads.size() != params.size() || state.velocity.size() != params.size())
    throw ShapeError("sgd_nesterov_step: " + std::to_string(params.size()) + " parameters, " +
                     std::to_string(grads.size()) + " gradients, " + std::to_string(state.velocity.size()) +
                     " velocity buffers");
  if (state.lr < Scalar(0)) throw std::invalid_argument("sgd_nesterov_step: negative learning rate");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape() || state.velocity[i].size() != params[i].size())
      throw ShapeError("sgd_nesterov_step: parameter " + std::to_string(i) + " has dims " +
                       params[i].shape().str() + " but gradient " + grads[i].shape().str());
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& v = state.velocity[i];
    const auto& g = grads[i].data();
    v = state.momentum * v + g;
    params[i].data() -= state.lr * (g + state.momentum * v);
  }
}

}  // namespace effseg
