#pragma once

#include <span>
#include <string>
#include <vector>

#include "dechw/errors.hpp"

namespace dechw {

// Classical SGD momentum: the velocity accumulates gradients and the update
// follows the velocity.
template <typename Scalar>
struct OptimizerState {
  Scalar learning_rate{};
  Scalar momentum{};
  std::vector<Scalar> velocity;

  OptimizerState() = default;
  OptimizerState(Scalar lr, Scalar mu, std::size_t m)
      : learning_rate(lr), momentum(mu), velocity(m, Scalar(0)) {
    if (!(lr > Scalar(0))) throw ConfigError("learning rate must be positive");
    if (mu < Scalar(0) || mu >= Scalar(1)) throw ConfigError("momentum must lie in [0,1)");
  }
};

// velocity <- momentum * velocity + grad;  params <- params - lr * velocity
template <typename Scalar>
void sgd_step(std::span<Scalar> params, std::span<const Scalar> grad, OptimizerState<Scalar>& opt) {
  if (params.size() != grad.size() || params.size() != opt.velocity.size())
    throw DimensionError("sgd_step: params/grad/velocity lengths differ (" +
                         std::to_string(params.size()) + "/" + std::to_string(grad.size()) + "/" +
                         std::to_string(opt.velocity.size()) + ")");
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.velocity[i] = opt.momentum * opt.velocity[i] + grad[i];
    params[i] -= opt.learning_rate * opt.velocity[i];
  }
}

}  // namespace dechw
