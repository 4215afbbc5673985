#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "eyemotion/dataset.hpp"
#include "eyemotion/training.hpp"

namespace eyemotion {

/// Trains the eyes-open/eyes-closed classifier on the neutral and closed-eye
/// frames among `indices`. Neutral frames carrying a blink flag are left out,
/// standing in for manual validation of the neutral class.
inline Classifier train_blink_classifier(const FrameSet& set, std::span<const std::size_t> indices,
                                         TrainConfig config) {
  const std::size_t neutral = set.labels.neutral(), closed = set.labels.closed();
  std::vector<TrainingExample> examples;
  for (auto i : indices) {
    const auto& f = set.frames.at(i);
    if (f.label == neutral && !f.sample.blink_flag) examples.push_back({&f.image, 0, nullptr});
    if (f.label == closed) examples.push_back({&f.image, 1, nullptr});
  }
  if (examples.empty()) throw InputError("no neutral or closed-eye frames to train the blink classifier");
  config.personalize = false;
  return train(examples, LabelSet::blink(), config).model;
}

struct BlinkFilterResult {
  std::vector<std::size_t> kept;
  std::vector<std::size_t> removed;
  std::map<std::string, std::size_t> removed_per_class;
};

/// Drops frames of every class except the closed-eye class whose
/// closed-eye probability exceeds `threshold`.
inline BlinkFilterResult blink_filter(const FrameSet& set, std::span<const std::size_t> indices,
                                      const Classifier& blink_model, double threshold) {
  if (blink_model.net.layers().empty()) throw InputError("blink classifier is untrained");
  if (blink_model.labels.kind() != LabelSetKind::blink) throw InputError("model is not an eyes-open/closed classifier");
  if (blink_model.personalized) throw InputError("blink classifier must use unpersonalized inputs");
  const std::size_t closed_class = set.labels.closed();
  const std::size_t closed_output = blink_model.labels.closed();
  BlinkFilterResult result;
  for (auto i : indices) {
    const auto& f = set.frames.at(i);
    if (f.label != closed_class && blink_model.probabilities(f.image.pixels)[closed_output] > threshold) {
      result.removed.push_back(i);
      ++result.removed_per_class[f.sample.label];
    } else {
      result.kept.push_back(i);
    }
  }
  return result;
}

}  // namespace eyemotion
