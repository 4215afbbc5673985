#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <utility>
#include <vector>

#include "eyemotion/labels.hpp"
#include "eyemotion/manifest.hpp"
#include "eyemotion/preprocess.hpp"
#include "eyemotion/synthgen.hpp"

namespace eyemotion {

/// A manifest sample together with its rectified network-ready image.
struct Frame {
  Sample sample;
  std::size_t label = 0;
  EyePairImage image;
};

struct FrameSet {
  LabelSet labels = LabelSet::emo5();
  double frame_rate = 10.0;
  std::vector<Frame> frames;
};

inline Provenance provenance_of(const Sample& s) { return {s.participant_id, s.session_id, s.frame_index}; }

/// Decodes and rectifies every manifest sample.
inline FrameSet load_frames(const Manifest& manifest, const LabelSet& labels, ImageSize input_size,
                            double frame_rate = 10.0) {
  FrameSet set{labels, frame_rate, {}};
  set.frames.reserve(manifest.samples.size());
  for (const auto& s : manifest.samples) {
    const auto left = read_pgm(manifest.root / s.left_path);
    const auto right = read_pgm(manifest.root / s.right_path);
    set.frames.push_back({s, labels.index(s.label), rectify_and_concat(left, right, input_size, provenance_of(s))});
  }
  return set;
}

/// In-memory equivalent of generate_dataset followed by load_frames.
inline FrameSet synthesize_frames(const GenConfig& config, ImageSize input_size, double blink_rate = 0.0) {
  auto samples = plan_dataset(config);
  const auto labels = config.labels();
  if (blink_rate > 0.0) inject_blinks(samples, labels, blink_rate, config.seed, config.enrollment_frames());
  FrameSet set{labels, config.frame_rate, {}};
  set.frames.reserve(samples.size());
  SampleRenderer renderer(config);
  for (auto& s : samples) {
    const auto pair = renderer.render(s);
    auto image = rectify_and_concat(pair.left, pair.right, input_size, provenance_of(s));
    set.frames.push_back({std::move(s), 0, std::move(image)});
    set.frames.back().label = labels.index(set.frames.back().sample.label);
  }
  return set;
}

using SessionKey = std::pair<int, int>;  // (participant, session)
using ProfileTable = std::map<SessionKey, PersonalizationProfile>;

/// Frames reserved for building profiles versus frames used as samples.
struct EnrollmentSplit {
  std::vector<std::size_t> enrollment;
  std::vector<std::size_t> samples;
};

/// The first `window` neutral frames (by frame index) of each
/// (participant, session) are enrollment frames; all others are samples.
inline EnrollmentSplit split_enrollment(std::span<const Frame> frames, const LabelSet& labels, std::size_t window) {
  std::map<SessionKey, std::vector<std::size_t>> neutral;
  const std::size_t n_label = labels.neutral();
  for (std::size_t i = 0; i < frames.size(); ++i) {
    if (frames[i].label == n_label) neutral[{frames[i].sample.participant_id, frames[i].sample.session_id}].push_back(i);
  }
  std::vector<char> is_enrollment(frames.size(), 0);
  for (auto& [key, idx] : neutral) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return frames[a].sample.frame_index < frames[b].sample.frame_index; });
    for (std::size_t k = 0; k < std::min(window, idx.size()); ++k) is_enrollment[idx[k]] = 1;
  }
  EnrollmentSplit split;
  for (std::size_t i = 0; i < frames.size(); ++i) (is_enrollment[i] ? split.enrollment : split.samples).push_back(i);
  return split;
}

/// One profile per (participant, session) from its enrollment frames.
inline ProfileTable build_profiles(std::span<const Frame> frames, std::span<const std::size_t> enrollment,
                                   double frame_rate) {
  std::map<SessionKey, std::vector<std::size_t>> groups;
  for (auto i : enrollment) groups[{frames[i].sample.participant_id, frames[i].sample.session_id}].push_back(i);
  ProfileTable table;
  for (auto& [key, idx] : groups) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return frames[a].sample.frame_index < frames[b].sample.frame_index; });
    std::vector<EyePairImage> images;
    images.reserve(idx.size());
    for (auto i : idx) images.push_back(frames[i].image);
    table.emplace(key, build_profile(images, frame_rate));
  }
  return table;
}

inline std::vector<int> participants_of(std::span<const Frame> frames) {
  std::set<int> ids;
  for (const auto& f : frames) ids.insert(f.sample.participant_id);
  return {ids.begin(), ids.end()};
}

}  // namespace eyemotion
