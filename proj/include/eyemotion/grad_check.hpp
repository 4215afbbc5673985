#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <span>
#include <vector>

#include "eyemotion/loss.hpp"
#include "eyemotion/network.hpp"
#include "eyemotion/rng.hpp"

namespace eyemotion {

/// Scalar objective over a double-precision network with an analytic
/// gradient. `kink_signature` fingerprints the piecewise-linear regime
/// (ReLU masks, max-pool winners); it may return an empty vector for smooth
/// objectives.
template <class O>
concept GradientObjective = requires(const O& o, const Network<double>& net) {
  { o.value(net) } -> std::convertible_to<double>;
  { o.gradient(net) } -> std::same_as<std::vector<Tensor<double>>>;
  { o.kink_signature(net) } -> std::same_as<std::vector<std::uint8_t>>;
};

/// Mean softmax cross-entropy plus L2 over weight tensors (biases excluded),
/// the training objective.
class ClassificationObjective {
 public:
  ClassificationObjective(std::span<const Tensor<double>> inputs, std::span<const std::size_t> labels,
                          double l2_lambda)
      : inputs_(inputs), labels_(labels), lambda_(l2_lambda) {
    if (inputs_.size() != labels_.size() || inputs_.empty()) {
      throw InputError("gradient check needs a non-empty batch with one label per input");
    }
  }

  double value(const Network<double>& net) const { return evaluate(net, nullptr); }

  std::vector<Tensor<double>> gradient(const Network<double>& net) const {
    auto grads = zero_gradients(net);
    evaluate(net, &grads);
    return grads;
  }

  std::vector<std::uint8_t> kink_signature(const Network<double>& net) const {
    std::vector<std::uint8_t> sig;
    for (const auto& x : inputs_) {
      const auto trace = forward(net, x);
      for (std::size_t i = 0; i < net.layers().size(); ++i) {
        const auto& in = trace.activations[i];
        if (net.layers()[i].kind == LayerKind::relu) {
          for (auto v : in.values()) sig.push_back(v > 0.0 ? 1 : 0);
        } else if (net.layers()[i].kind == LayerKind::maxpool2x2) {
          const auto& out = trace.activations[i + 1];
          for (std::size_t c = 0; c < out.dim(0); ++c)
            for (std::size_t y = 0; y < out.dim(1); ++y)
              for (std::size_t xx = 0; xx < out.dim(2); ++xx) {
                std::uint8_t best = 0;
                double m = in.at(c, 2 * y, 2 * xx);
                for (std::uint8_t q = 1; q < 4; ++q) {
                  const double v = in.at(c, 2 * y + q / 2, 2 * xx + q % 2);
                  if (v > m) {
                    m = v;
                    best = q;
                  }
                }
                sig.push_back(best);
              }
        }
      }
    }
    return sig;
  }

 private:
  double evaluate(const Network<double>& net, std::vector<Tensor<double>>* grads) const {
    const std::size_t n = inputs_.size();
    const std::size_t c = net.output_shape()[0];
    Tensor<double> probs(Shape{n, c});
    std::vector<ForwardTrace<double>> traces;
    for (std::size_t r = 0; r < n; ++r) {
      traces.push_back(forward(net, inputs_[r]));
      std::copy_n(traces.back().output().data(), c, probs.data() + r * c);
    }
    std::vector<Tensor<double>> weights;
    for (std::size_t t = 0; t < net.parameters().size(); t += 2) weights.push_back(net.parameters()[t]);
    const auto one_hot = one_hot_rows<double>(labels_, c);
    const auto result = softmax_cross_entropy<double>(probs, one_hot, weights, {c, lambda_});
    if (grads) {
      for (std::size_t r = 0; r < n; ++r) {
        Tensor<double> g(Shape{c});
        std::copy_n(result.logit_grad.data() + r * c, c, g.data());
        backward_accumulate(net, traces[r], g, *grads);
      }
      for (std::size_t t = 0; t < net.parameters().size(); t += 2) {
        add_l2_gradient(net.parameters()[t], (*grads)[t], lambda_, n);
      }
    }
    return result.loss;
  }

  std::span<const Tensor<double>> inputs_;
  std::span<const std::size_t> labels_;
  double lambda_;
};

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  std::size_t coordinates = 100;
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates rejected because the +/- step crossed a ReLU or max-pool
  /// kink, where central differences are not a valid oracle.
  std::size_t skipped_kinks = 0;
  std::size_t worst_tensor = 0;
  std::size_t worst_element = 0;
  bool passed = false;
};

/// Compares the objective's analytic gradient against central differences
/// at randomly drawn parameter coordinates.
template <GradientObjective Objective>
GradCheckReport grad_check(Network<double> net, const Objective& objective, const GradCheckOptions& options) {
  const auto analytic = objective.gradient(net);
  const auto base_sig = objective.kink_signature(net);

  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (const auto& p : net.parameters()) {
    offsets.push_back(total);
    total += p.size();
  }
  if (total == 0) throw InputError("network has no parameters to check");

  Rng rng(options.seed);
  GradCheckReport report;
  const std::size_t max_attempts = options.coordinates * 20;
  for (std::size_t attempt = 0; attempt < max_attempts && report.checked < options.coordinates; ++attempt) {
    const std::size_t flat = rng.below(total);
    const auto it = std::upper_bound(offsets.begin(), offsets.end(), flat);
    const std::size_t t = static_cast<std::size_t>(it - offsets.begin()) - 1;
    const std::size_t e = flat - offsets[t];
    double& w = net.parameters()[t][e];
    const double saved = w;

    w = saved + options.step;
    const double f_plus = objective.value(net);
    const bool kink_plus = objective.kink_signature(net) != base_sig;
    w = saved - options.step;
    const double f_minus = objective.value(net);
    const bool kink_minus = objective.kink_signature(net) != base_sig;
    w = saved;
    if (kink_plus || kink_minus) {
      ++report.skipped_kinks;
      continue;
    }

    const double numeric = (f_plus - f_minus) / (2.0 * options.step);
    const double a = analytic[t][e];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    const double rel = std::abs(a - numeric) / denom;
    if (rel >= report.max_relative_error) {
      report.max_relative_error = rel;
      report.worst_tensor = t;
      report.worst_element = e;
    }
    ++report.checked;
  }
  report.passed = report.checked >= options.coordinates && report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace eyemotion
