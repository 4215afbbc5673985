#pragma once

#include <algorithm>
#include <cmath>
#include <span>

#include "eyemotion/error.hpp"
#include "eyemotion/tensor.hpp"

namespace eyemotion {

struct LossSpec {
  std::size_t num_classes = 0;
  double l2_lambda = 0.0004;
};

template <typename T>
struct LossResult {
  T loss{0};
  T data_term{0};
  T l2_term{0};
  /// d(loss)/d(logits), [N, C]. Excludes the L2 term, which is a function of
  /// the parameters rather than the logits.
  Tensor<T> logit_grad;
};

/// Mean softmax cross-entropy over an [N, C] batch plus (lambda / N) * sum w^2
/// over `regularized`.
///
/// Probabilities are clamped to [1e-12, 1 - 1e-12] before the log. The
/// gradient uses the softmax/cross-entropy identity (p - y) / N.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor<T>& probabilities, const Tensor<T>& one_hot,
                                    std::span<const Tensor<T>> regularized, const LossSpec& spec) {
  if (probabilities.rank() != 2 || probabilities.shape() != one_hot.shape()) {
    throw InputError("probabilities " + shape_string(probabilities.shape()) + " and labels " +
                     shape_string(one_hot.shape()) + " must both be [N, C]");
  }
  const std::size_t n = probabilities.dim(0), c = probabilities.dim(1);
  if (spec.num_classes != 0 && c != spec.num_classes) {
    throw InputError("expected " + std::to_string(spec.num_classes) + " classes, got " + std::to_string(c));
  }
  constexpr double kLow = 1e-12;
  constexpr double kHigh = 1.0 - 1e-12;

  LossResult<T> result;
  result.logit_grad = Tensor<T>(probabilities.shape());
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    double row_sum = 0.0, label_sum = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      row_sum += static_cast<double>(probabilities.at(r, k));
      label_sum += static_cast<double>(one_hot.at(r, k));
    }
    if (std::abs(row_sum - 1.0) > 1e-6) {
      throw InputError("probability row " + std::to_string(r) + " sums to " + std::to_string(row_sum));
    }
    if (label_sum == 0.0) throw InputError("label row " + std::to_string(r) + " is all zero");
    for (std::size_t k = 0; k < c; ++k) {
      const double y = static_cast<double>(one_hot.at(r, k));
      const double p = std::clamp(static_cast<double>(probabilities.at(r, k)), kLow, kHigh);
      if (y != 0.0) total -= y * std::log(p);
      result.logit_grad.at(r, k) = static_cast<T>((probabilities.at(r, k) - one_hot.at(r, k)) / static_cast<T>(n));
    }
  }
  double l2 = 0.0;
  for (const auto& w : regularized) l2 += static_cast<double>(squared_norm(w));
  result.data_term = static_cast<T>(total / static_cast<double>(n));
  result.l2_term = static_cast<T>(spec.l2_lambda * l2 / static_cast<double>(n));
  result.loss = static_cast<T>(total / static_cast<double>(n) + spec.l2_lambda * l2 / static_cast<double>(n));
  return result;
}

/// Gradient of (lambda / n) * sum w^2 with respect to w, added in place.
template <typename T>
void add_l2_gradient(const Tensor<T>& weights, Tensor<T>& grad, double lambda, std::size_t n) {
  const T scale = static_cast<T>(2.0 * lambda / static_cast<double>(n));
  for (std::size_t i = 0; i < weights.size(); ++i) grad[i] += scale * weights[i];
}

template <typename T>
Tensor<T> one_hot_rows(std::span<const std::size_t> labels, std::size_t num_classes) {
  Tensor<T> out(Shape{labels.size(), num_classes});
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] >= num_classes) throw InputError("label index out of range");
    out.at(r, labels[r]) = T{1};
  }
  return out;
}

}  // namespace eyemotion
