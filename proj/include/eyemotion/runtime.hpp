#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eyemotion/preprocess.hpp"
#include "eyemotion/training.hpp"

namespace eyemotion {

/// Exponentially smoothed class distribution of one stream.
struct SmoothedState {
  std::vector<double> s;
  double alpha = 0.3;

  static SmoothedState uniform(std::size_t classes, double alpha = 0.3) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("smoothing alpha must be in (0, 1]");
    if (classes == 0) throw InputError("need at least one class");
    return {std::vector<double>(classes, 1.0 / static_cast<double>(classes)), alpha};
  }
};

/// s <- alpha * p + (1 - alpha) * s.
inline void smooth(SmoothedState& state, std::span<const double> p) {
  if (p.size() != state.s.size()) throw InputError("probability vector has the wrong length");
  double total = 0.0;
  for (auto v : p) {
    if (!(v >= -1e-6)) throw InputError("probability vector has a negative entry");
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-6) throw InputError("probability vector sums to " + std::to_string(total));
  for (std::size_t i = 0; i < p.size(); ++i) state.s[i] = state.alpha * p[i] + (1.0 - state.alpha) * state.s[i];
}

struct BlendshapeFrame {
  std::int64_t timestamp_ms = 0;
  std::vector<std::pair<std::string, double>> channels;  // one per non-neutral class
  std::string stable_label;
};

inline BlendshapeFrame to_blendshapes(const SmoothedState& state, const LabelSet& labels, std::int64_t timestamp_ms) {
  BlendshapeFrame f;
  f.timestamp_ms = timestamp_ms;
  const auto neutral = labels.find("Neutral");
  for (std::size_t c = 0; c < labels.size(); ++c) {
    if (neutral && c == *neutral) continue;
    f.channels.emplace_back(labels[c], state.s.at(c));
  }
  f.stable_label = labels[argmax(std::span<const double>(state.s))];
  return f;
}

/// Class distribution for one eye pair. A personalized model needs the
/// user's enrollment profile.
inline std::vector<double> infer_frame(const Classifier& model, const EyePairImage& frame,
                                       const PersonalizationProfile* profile) {
  if (model.personalized && !profile) {
    throw InputError("this model was trained with personalization: enroll the user (record neutral frames) "
                     "and supply a profile");
  }
  const auto probs = model.probabilities(profile && model.personalized ? personalize(frame, *profile, nullptr)
                                                                      : frame.pixels);
  return {probs.begin(), probs.end()};
}

/// One frame to process: eye image paths plus identity for profile lookup.
struct FrameRequest {
  std::string left_path;
  std::string right_path;
  int participant_id = -1;
  int session_id = -1;
};

using FrameLoader = std::function<EyePairImage(const FrameRequest&)>;
using ProfileLookup = std::function<const PersonalizationProfile*(const FrameRequest&)>;

struct StreamSummary {
  std::size_t frames = 0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
};

inline double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

inline nlohmann::ordered_json stream_record(std::size_t seq, const std::vector<double>& probs,
                                            const BlendshapeFrame& frame, const LabelSet& labels) {
  nlohmann::ordered_json j;
  j["seq"] = seq;
  j["timestamp_ms"] = frame.timestamp_ms;
  nlohmann::ordered_json p = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < labels.size(); ++c) p[labels[c]] = probs[c];
  j["probs"] = p;
  j["stable_label"] = frame.stable_label;
  nlohmann::ordered_json b = nlohmann::ordered_json::object();
  for (const auto& [name, w] : frame.channels) b[name] = w;
  j["blendshapes"] = b;
  return j;
}

/// Processes frames in order, writing one JSON line per decoded frame and a
/// trailing latency summary. Frames that fail to load are skipped with a
/// warning; sequence numbers still advance. Timestamps follow the capture
/// rate, so the per-frame lines are reproducible.
inline StreamSummary stream_run(const Classifier& model, std::span<const FrameRequest> source, const FrameLoader& load,
                                const ProfileLookup& profile_for, double alpha, std::ostream& out,
                                double frame_rate = 10.0, const WarningSink& warn = default_warning) {
  auto state = SmoothedState::uniform(model.labels.size(), alpha);
  std::vector<double> latencies;
  for (std::size_t seq = 0; seq < source.size(); ++seq) {
    const auto& req = source[seq];
    const auto start = std::chrono::steady_clock::now();
    EyePairImage image;
    try {
      image = load(req);
    } catch (const Error& e) {
      if (warn) warn("skipping frame " + std::to_string(seq) + ": " + e.what());
      continue;
    }
    const auto probs = infer_frame(model, image, profile_for ? profile_for(req) : nullptr);
    smooth(state, probs);
    const auto ts = static_cast<std::int64_t>(std::llround(static_cast<double>(seq) * 1000.0 / frame_rate));
    const auto frame = to_blendshapes(state, model.labels, ts);
    out << stream_record(seq, probs, frame, model.labels).dump() << '\n';
    latencies.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
  }
  StreamSummary summary{latencies.size(), percentile(latencies, 0.5), percentile(latencies, 0.99)};
  nlohmann::ordered_json j;
  j["frames"] = summary.frames;
  j["p50_ms"] = summary.p50_ms;
  j["p99_ms"] = summary.p99_ms;
  out << j.dump() << '\n';
  return summary;
}

/// Number of frame-to-frame changes in a label sequence.
inline std::size_t count_transitions(std::span<const std::size_t> labels) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < labels.size(); ++i) n += labels[i] != labels[i - 1] ? 1 : 0;
  return n;
}

}  // namespace eyemotion
