#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "eyemotion/error.hpp"
#include "eyemotion/tensor.hpp"

namespace eyemotion {

struct OptimizerConfig {
  double learning_rate = 0.045;
  double momentum = 0.9;
  double decay = 0.9;
  double epsilon = 1.0;

  void validate() const {
    if (!(learning_rate > 0)) throw ConfigError("learning rate must be positive");
    if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must be in [0, 1)");
    if (!(decay > 0 && decay < 1)) throw ConfigError("decay must be in (0, 1)");
    if (!(epsilon > 0)) throw ConfigError("epsilon must be positive");
  }
};

/// Per-parameter mean-square accumulator and momentum buffer.
template <typename T>
struct RmsPropState {
  std::vector<Tensor<T>> mean_square;
  std::vector<Tensor<T>> momentum;
};

/// One RMSProp-with-momentum update, element-wise:
///   ms <- decay * ms + (1 - decay) * g^2
///   m  <- momentum * m + lr * g / sqrt(ms + eps)
///   w  <- w - m
/// State is zero-initialized on first use. A non-finite gradient aborts the
/// step before anything is modified.
template <typename T>
void rmsprop_step(std::span<Tensor<T>> params, std::span<const Tensor<T>> grads, RmsPropState<T>& state,
                  const OptimizerConfig& config, double current_lr) {
  if (params.size() != grads.size()) throw InternalError("parameter/gradient count mismatch");
  for (std::size_t t = 0; t < grads.size(); ++t) {
    if (grads[t].shape() != params[t].shape()) throw InternalError("gradient shape mismatch for tensor " + std::to_string(t));
    for (std::size_t i = 0; i < grads[t].size(); ++i) {
      if (!std::isfinite(grads[t][i])) {
        throw NumericError("non-finite gradient in parameter tensor " + std::to_string(t) + " at element " +
                           std::to_string(i));
      }
    }
  }
  if (state.mean_square.empty()) {
    for (const auto& p : params) {
      state.mean_square.emplace_back(p.shape());
      state.momentum.emplace_back(p.shape());
    }
  }
  const T decay = static_cast<T>(config.decay);
  const T keep = static_cast<T>(1.0 - config.decay);
  const T mom = static_cast<T>(config.momentum);
  const T eps = static_cast<T>(config.epsilon);
  const T lr = static_cast<T>(current_lr);
  for (std::size_t t = 0; t < params.size(); ++t) {
    T* w = params[t].data();
    const T* g = grads[t].data();
    T* ms = state.mean_square[t].data();
    T* m = state.momentum[t].data();
    for (std::size_t i = 0; i < params[t].size(); ++i) {
      ms[i] = decay * ms[i] + keep * g[i] * g[i];
      m[i] = mom * m[i] + lr * g[i] / std::sqrt(ms[i] + eps);
      w[i] -= m[i];
    }
  }
}

}  // namespace eyemotion
