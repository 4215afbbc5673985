#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eyemotion/dataset.hpp"
#include "eyemotion/loss.hpp"
#include "eyemotion/network.hpp"
#include "eyemotion/optimizer.hpp"
#include "eyemotion/preprocess.hpp"
#include "eyemotion/rng.hpp"

namespace eyemotion {

struct TrainConfig {
  double initial_lr = 0.045;
  double lr_decay = 0.94;  // per epoch, stepwise
  double l2_lambda = 0.0004;
  std::size_t batch_size = 32;
  std::size_t epochs = 30;
  std::uint64_t seed = 0;
  bool personalize = true;
  ImageSize input_size{64, 128};
  AugmentConfig augment{};
  double momentum = 0.9;
  double rms_decay = 0.9;
  double epsilon = 1.0;

  OptimizerConfig optimizer() const { return {initial_lr, momentum, rms_decay, epsilon}; }

  void validate() const {
    optimizer().validate();
    if (!(lr_decay > 0 && lr_decay <= 1)) throw ConfigError("learning-rate decay must be in (0, 1]");
    if (l2_lambda < 0) throw ConfigError("L2 weight must be non-negative");
    if (batch_size == 0) throw ConfigError("batch size must be positive");
    if (epochs == 0) throw ConfigError("need at least one epoch");
  }

  nlohmann::json to_json() const {
    return {{"initial_lr", initial_lr},
            {"lr_decay", lr_decay},
            {"l2_lambda", l2_lambda},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"seed", seed},
            {"personalize", personalize},
            {"input_size", input_size.to_string()},
            {"augment", {{"rotation_deg", augment.rotation_deg}, {"scale", augment.scale}, {"brightness", augment.brightness}}},
            {"momentum", momentum},
            {"rms_decay", rms_decay},
            {"epsilon", epsilon}};
  }
};

/// FNV-1a over the canonical JSON of a config.
inline std::uint64_t config_hash(const nlohmann::json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Stepwise schedule: initial_lr * decay^epoch, constant within an epoch.
inline double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  return config.initial_lr * std::pow(config.lr_decay, static_cast<double>(epoch));
}

/// A trained network plus what is needed to use it: class vocabulary, input
/// size and whether inputs must be personalized.
struct Classifier {
  Network<float> net;
  LabelSet labels = LabelSet::emo5();
  bool personalized = false;
  nlohmann::json meta = nlohmann::json::object();

  ImageSize input_size() const { return {net.input_shape().height, net.input_shape().width}; }

  std::vector<float> probabilities(const FloatImage& input) const {
    const auto trace = forward(net, to_tensor(input));
    const auto v = trace.output().values();
    return {v.begin(), v.end()};
  }
};

/// The compact classifier: three conv3x3(same)/ReLU/maxpool stages with
/// 8, 16 and 32 channels, dense(64)/ReLU, dense(C), softmax.
inline std::vector<LayerSpec> compact_architecture(std::size_t num_classes, ImageSize input) {
  if (input.height < 16 || input.width < 16) {
    throw ConfigError("input " + input.to_string() + " is smaller than the 16x16 minimum");
  }
  if (num_classes < 2) throw ConfigError("need at least two classes");
  const std::size_t flat = 32 * (input.height / 8) * (input.width / 8);
  return {LayerSpec::conv(1, 8, 3, 1),  LayerSpec::relu(), LayerSpec::maxpool(),
          LayerSpec::conv(8, 16, 3, 1), LayerSpec::relu(), LayerSpec::maxpool(),
          LayerSpec::conv(16, 32, 3, 1), LayerSpec::relu(), LayerSpec::maxpool(),
          LayerSpec::flatten(),          LayerSpec::dense(flat, 64), LayerSpec::relu(),
          LayerSpec::dense(64, num_classes), LayerSpec::softmax()};
}

/// Fills weights with U(-sqrt(6 / fan_in), sqrt(6 / fan_in)) and zeroes biases.
template <typename T>
void initialize_parameters(Network<T>& net, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x494E4954ULL}));
  auto& params = net.parameters();
  for (std::size_t t = 0; t < params.size(); t += 2) {
    const auto& shape = params[t].shape();
    std::size_t fan_in = 1;
    for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& w : params[t].values()) w = static_cast<T>(rng.uniform(-limit, limit));
    params[t + 1].fill(T{0});
  }
}

inline Network<float> build_model(const LabelSet& labels, ImageSize input, std::uint64_t seed) {
  Network<float> net({1, input.height, input.width}, compact_architecture(labels.size(), input));
  initialize_parameters(net, seed);
  return net;
}

/// One training example: an image, its class, and (when personalizing) the
/// profile of its (participant, session).
struct TrainingExample {
  const EyePairImage* image = nullptr;
  std::size_t label = 0;
  const PersonalizationProfile* profile = nullptr;
};

struct TrainResult {
  Classifier model;
  std::vector<double> epoch_losses;
};

/// Assembles the network input: augmentation on the normalized image, then
/// optional profile subtraction.
inline Tensor<float> assemble_input(const EyePairImage& image, const PersonalizationProfile* profile,
                                    const AugmentDraw* draw) {
  if (draw) {
    auto aug = augment(image, *draw);
    return to_tensor(profile ? personalize(aug, *profile, nullptr) : std::move(aug.pixels));
  }
  return to_tensor(profile ? personalize(image, *profile, nullptr) : image.pixels);
}

/// Mini-batch training of the compact classifier with softmax cross-entropy
/// plus L2 on weights (not biases), RMSProp, and a per-epoch stepwise
/// learning rate. Shuffling and augmentation are reseeded from
/// (seed, epoch), so results depend only on the inputs and config.
inline TrainResult train(std::span<const TrainingExample> examples, const LabelSet& labels, const TrainConfig& config) {
  config.validate();
  if (examples.empty()) throw InputError("training set is empty");
  for (const auto& ex : examples) {
    if (ex.label >= labels.size()) throw InputError("training label out of range");
    if (config.personalize && !ex.profile) {
      throw InputError("missing personalization profile for participant " +
                       std::to_string(ex.image->provenance.participant_id) + " session " +
                       std::to_string(ex.image->provenance.session_id));
    }
    if (ex.image->pixels.height != config.input_size.height || ex.image->pixels.width != config.input_size.width) {
      throw InputError("training image size does not match configured input size " + config.input_size.to_string());
    }
  }

  TrainResult result;
  auto net = build_model(labels, config.input_size, config.seed);
  const std::size_t C = labels.size();
  const OptimizerConfig opt = config.optimizer();
  RmsPropState<float> state;
  auto grads = zero_gradients(net);
  std::vector<std::size_t> order(examples.size());

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    Rng shuffle_rng(derive_seed(config.seed, {0x53485546ULL, epoch}));
    shuffle_rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t n = std::min(config.batch_size, order.size() - start);
      for (auto& g : grads) g.fill(0.0f);
      Tensor<float> probs(Shape{n, C});
      std::vector<ForwardTrace<float>> traces;
      traces.reserve(n);
      std::vector<std::size_t> batch_labels(n);
      for (std::size_t b = 0; b < n; ++b) {
        const std::size_t pos = start + b;
        const auto& ex = examples[order[pos]];
        Rng aug_rng(derive_seed(config.seed, {0x41554721ULL, epoch, pos}));
        const auto draw = draw_augment(config.augment, aug_rng);
        traces.push_back(forward(net, assemble_input(*ex.image, config.personalize ? ex.profile : nullptr, &draw)));
        std::copy_n(traces.back().output().data(), C, probs.data() + b * C);
        batch_labels[b] = ex.label;
      }
      std::vector<Tensor<float>> weights;
      for (std::size_t t = 0; t < net.parameters().size(); t += 2) weights.push_back(net.parameters()[t]);
      const auto loss = softmax_cross_entropy<float>(probs, one_hot_rows<float>(batch_labels, C), weights,
                                                     {C, config.l2_lambda});
      if (!std::isfinite(loss.loss)) {
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " batch " + std::to_string(batches));
      }
      for (std::size_t b = 0; b < n; ++b) {
        Tensor<float> g(Shape{C});
        std::copy_n(loss.logit_grad.data() + b * C, C, g.data());
        backward_accumulate(net, traces[b], g, grads);
      }
      for (std::size_t t = 0; t < net.parameters().size(); t += 2) {
        add_l2_gradient(net.parameters()[t], grads[t], config.l2_lambda, n);
      }
      try {
        rmsprop_step<float>(net.parameters(), grads, state, opt, lr);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + " batch " +
                           std::to_string(batches) + ")");
      }
      epoch_loss += loss.loss;
      ++batches;
    }
    result.epoch_losses.push_back(epoch_loss / static_cast<double>(batches));
  }

  result.model.net = std::move(net);
  result.model.labels = labels;
  result.model.personalized = config.personalize;
  const auto cfg = config.to_json();
  result.model.meta = {{"config", cfg},
                       {"config_hash", config_hash(cfg)},
                       {"epoch", config.epochs},
                       {"final_train_loss", result.epoch_losses.back()}};
  return result;
}

/// Training examples for `indices` of a frame set. With personalization on,
/// every (participant, session) must have a profile.
inline std::vector<TrainingExample> make_examples(const FrameSet& set, std::span<const std::size_t> indices,
                                                  const ProfileTable* profiles) {
  std::vector<TrainingExample> out;
  out.reserve(indices.size());
  for (auto i : indices) {
    const auto& f = set.frames.at(i);
    TrainingExample ex{&f.image, f.label, nullptr};
    if (profiles) {
      const auto it = profiles->find({f.sample.participant_id, f.sample.session_id});
      if (it == profiles->end()) {
        throw InputError("missing personalization profile for participant " + std::to_string(f.sample.participant_id) +
                         " session " + std::to_string(f.sample.session_id));
      }
      ex.profile = &it->second;
    }
    out.push_back(ex);
  }
  return out;
}

}  // namespace eyemotion
