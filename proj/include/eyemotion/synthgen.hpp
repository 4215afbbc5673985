#pragma once

// Procedural periocular image generator. Each participant has a fixed
// appearance (brow, lid and iris geometry, skin tone, and a smooth additive
// texture field); each session adds a headset pose offset and illumination
// gain; each frame adds gaze, expression-intensity jitter and sensor noise.
// Expression labels deform brow and lid geometry.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "eyemotion/error.hpp"
#include "eyemotion/image.hpp"
#include "eyemotion/labels.hpp"
#include "eyemotion/manifest.hpp"
#include "eyemotion/rng.hpp"

namespace eyemotion {

enum class Eye { left = 0, right = 1 };

/// Per-eye camera resolution of each headset.
struct HmdSpec {
  int id = 1;
  std::size_t eye_width = 200;
  std::size_t eye_height = 200;
};

inline HmdSpec hmd_spec(int id) {
  if (id == 1) return {1, 200, 200};
  if (id == 2) return {2, 320, 240};
  throw InputError("unknown HMD id " + std::to_string(id) + " (expected 1 or 2)");
}

struct GenConfig {
  int num_participants = 23;
  int sessions = 2;
  /// Frames recorded per expression per session; 0 selects the value that
  /// gives about 2000 frames per participant.
  int frames_per_expression = 0;
  double frame_rate = 10.0;
  /// Length of the neutral enrollment clip recorded at the start of every
  /// session, before the expression clips.
  double enrollment_seconds = 5.0;
  int hmd_id = 1;
  LabelSetKind label_set = LabelSetKind::au10;
  /// Fraction of participants who skip one asymmetric brow class.
  double skip_fraction = 0.1;
  std::uint64_t seed = 0;

  LabelSet labels() const { return LabelSet::of(label_set); }

  int enrollment_frames() const { return static_cast<int>(std::lround(enrollment_seconds * frame_rate)); }

  int resolved_frames_per_expression() const {
    if (frames_per_expression > 0) return frames_per_expression;
    const double per_session = 2000.0 / sessions - enrollment_frames();
    return std::max(1, static_cast<int>(std::lround(per_session / static_cast<double>(labels().size()))));
  }

  void validate() const {
    if (num_participants < 1) throw ConfigError("need at least one participant");
    if (sessions < 1) throw ConfigError("need at least one session");
    if (frames_per_expression < 0) throw ConfigError("frames per expression must be non-negative");
    if (!(frame_rate > 0)) throw ConfigError("frame rate must be positive");
    if (enrollment_seconds < 0) throw ConfigError("enrollment length must be non-negative");
    if (skip_fraction < 0 || skip_fraction > 1) throw ConfigError("skip fraction must be in [0, 1]");
    hmd_spec(hmd_id);
  }
};

/// Appearance texture: a sum of low-frequency cosines, in eye-height units.
struct TextureWave {
  double amplitude = 0, fx = 0, fy = 0, phase = 0;
};

/// Fixed appearance of one participant. Geometry is in units of the eye
/// image height; intensities are in [0, 1].
struct ParticipantProfile {
  int participant_id = 0;
  std::uint64_t global_seed = 0;
  double skin = 0.5;
  double brow_height = 0.29;
  double brow_thickness = 0.06;
  double brow_darkness = 0.25;
  double brow_curve = 0.05;
  double eye_half_width = 0.3;
  double eye_aperture = 0.11;
  double iris_radius = 0.2;
  double iris_intensity = 0.45;
  std::array<std::vector<TextureWave>, 2> texture;  // per eye
};

inline ParticipantProfile make_participant(std::uint64_t global_seed, int participant_id) {
  Rng rng(derive_seed(global_seed, {0x5041525449ULL, static_cast<std::uint64_t>(participant_id)}));
  ParticipantProfile p;
  p.participant_id = participant_id;
  p.global_seed = global_seed;
  p.skin = rng.uniform(0.36, 0.60);
  p.brow_height = rng.uniform(0.24, 0.34);
  p.brow_thickness = rng.uniform(0.045, 0.08);
  p.brow_darkness = rng.uniform(0.15, 0.32);
  p.brow_curve = rng.uniform(0.02, 0.08);
  p.eye_half_width = rng.uniform(0.27, 0.34);
  p.eye_aperture = rng.uniform(0.085, 0.14);
  p.iris_radius = rng.uniform(0.15, 0.30);
  p.iris_intensity = rng.uniform(0.50, 0.72);
  for (auto& waves : p.texture) {
    for (int k = 0; k < 5; ++k) {
      TextureWave w;
      w.amplitude = rng.uniform(0.015, 0.04);
      const double freq = rng.uniform(0.6, 2.5);
      const double angle = rng.uniform(0.0, std::numbers::pi);
      w.fx = freq * std::cos(angle);
      w.fy = freq * std::sin(angle);
      w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      waves.push_back(w);
    }
  }
  return p;
}

/// Headset fit for one session: translation as a fraction of the image
/// size, in-plane rotation, and multiplicative illumination gain.
struct SessionContext {
  int participant_id = 0;
  int session_id = 0;
  double offset_x = 0;
  double offset_y = 0;
  double rotation_deg = 0;
  double gain = 1;
};

inline SessionContext make_session(std::uint64_t global_seed, int participant_id, int session_id) {
  Rng rng(derive_seed(global_seed, {0x53455353ULL, static_cast<std::uint64_t>(participant_id),
                                    static_cast<std::uint64_t>(session_id)}));
  SessionContext s;
  s.participant_id = participant_id;
  s.session_id = session_id;
  s.offset_x = rng.uniform(-0.08, 0.08);
  s.offset_y = rng.uniform(-0.08, 0.08);
  s.rotation_deg = rng.uniform(-4.0, 4.0);
  s.gain = rng.uniform(0.9, 1.1);
  return s;
}

/// Expression deformation of one eye region, relative to neutral.
struct EyePose {
  double aperture = 1.0;     // lid opening scale; 0 is closed
  double brow_raise = 0.0;   // upward brow shift (negative lowers)
  double brow_inner = 0.0;   // extra lowering of the nasal brow end
  double lower_lid = 0.0;    // fraction of the lower opening removed by a cheek raise
};

struct ExpressionPose {
  EyePose left;
  EyePose right;
};

inline ExpressionPose expression_pose(const LabelSet& labels, std::size_t label) {
  const std::string& name = labels[label];
  ExpressionPose e;
  auto both = [&](EyePose p) { e.left = e.right = p; };
  if (name == "Neutral") {
  } else if (name == "LeftBrowRaise") {
    e.left.brow_raise = 0.07;
  } else if (name == "RightBrowRaise") {
    e.right.brow_raise = 0.07;
  } else if (name == "BrowLower" || name == "Anger") {
    both({0.8, -0.05, 0.05, 0.0});
  } else if (name == "UpperLidRaise") {
    both({1.45, 0.0, 0.0, 0.0});
  } else if (name == "Squint") {
    both({0.5, 0.0, 0.0, 0.0});
  } else if (name == "EyesClosed" || name == "ClosedEyes") {
    both({0.0, 0.0, 0.0, 0.0});
  } else if (name == "LeftWink") {
    e.left.aperture = 0.0;
  } else if (name == "RightWink") {
    e.right.aperture = 0.0;
  } else if (name == "CheekRaise") {
    both({1.0, 0.0, 0.0, 0.5});
  } else if (name == "Happiness") {
    both({0.75, 0.0, 0.0, 0.5});
  } else if (name == "Surprise") {
    both({1.45, 0.08, 0.0, 0.0});
  } else {
    throw InputError("no expression geometry for label '" + name + "'");
  }
  return e;
}

/// Scales a pose's deviation from neutral by `intensity`.
inline EyePose scale_pose(const EyePose& p, double intensity) {
  return {1.0 + intensity * (p.aperture - 1.0), intensity * p.brow_raise, intensity * p.brow_inner,
          intensity * p.lower_lid};
}

struct Gaze {
  double x = 0;
  double y = 0;
};

struct RenderOptions {
  bool appearance_field = true;
  bool noise = true;
  double noise_sigma = 0.02;
};

namespace detail {

inline double smooth01(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return v * v * (3.0 - 2.0 * v);
}

/// Eye-centered coordinates (eye-height units) of a pixel, undoing the
/// session's headset offset and rotation.
struct EyeFrame {
  double cx, cy, cos_r, sin_r, scale, offset_x, offset_y;

  EyeFrame(const SessionContext& s, std::size_t h, std::size_t w) {
    cx = (static_cast<double>(w) - 1.0) / 2.0;
    cy = (static_cast<double>(h) - 1.0) / 2.0;
    const double r = s.rotation_deg * std::numbers::pi / 180.0;
    cos_r = std::cos(r);
    sin_r = std::sin(r);
    scale = static_cast<double>(h);
    offset_x = s.offset_x * static_cast<double>(w);
    offset_y = s.offset_y * static_cast<double>(h);
  }

  std::pair<double, double> map(std::size_t px, std::size_t py) const {
    const double u = static_cast<double>(px) - cx - offset_x;
    const double v = static_cast<double>(py) - cy - offset_y;
    return {(cos_r * u + sin_r * v) / scale, (-sin_r * u + cos_r * v) / scale};
  }
};

constexpr double kEyeCenterY = 0.05;
constexpr double kLowerLidRatio = 0.7;

struct LidLines {
  double upper, lower, t;
};

inline LidLines lid_lines(const ParticipantProfile& p, const EyePose& pose, double x) {
  const double t = 1.0 - (x / p.eye_half_width) * (x / p.eye_half_width);
  if (t <= 0.0) return {kEyeCenterY, kEyeCenterY, t};
  const double open = p.eye_aperture * std::max(pose.aperture, 0.0) * t;
  return {kEyeCenterY - open, kEyeCenterY + kLowerLidRatio * open * (1.0 - pose.lower_lid), t};
}

}  // namespace detail

/// Pose-independent layers of one eye for a (participant, session): pixel
/// coordinates, skin with socket shading, the neutral lid opening and the
/// appearance texture. Reused across every frame of the session.
struct EyeCanvas {
  const ParticipantProfile* profile = nullptr;
  SessionContext session;
  Eye eye = Eye::left;
  std::size_t height = 0, width = 0;
  std::vector<double> x, y, base, rest_inside, texture;
};

inline EyeCanvas make_canvas(const ParticipantProfile& p, const SessionContext& s, Eye eye, const HmdSpec& hmd) {
  EyeCanvas c;
  c.profile = &p;
  c.session = s;
  c.eye = eye;
  c.height = hmd.eye_height;
  c.width = hmd.eye_width;
  const std::size_t n = c.height * c.width;
  c.x.resize(n);
  c.y.resize(n);
  c.base.resize(n);
  c.rest_inside.resize(n);
  c.texture.resize(n);
  const detail::EyeFrame frame(s, c.height, c.width);
  const double edge = 1.2 / static_cast<double>(c.height);
  const auto& waves = p.texture[static_cast<std::size_t>(eye)];
  for (std::size_t py = 0; py < c.height; ++py)
    for (std::size_t px = 0; px < c.width; ++px) {
      const std::size_t i = py * c.width + px;
      const auto [x, y] = frame.map(px, py);
      c.x[i] = x;
      c.y[i] = y;
      const double xn = x / p.eye_half_width;
      const double dy_socket = (y - detail::kEyeCenterY) / (2.5 * p.eye_aperture);
      c.base[i] = p.skin - 0.05 * std::exp(-(xn * xn + dy_socket * dy_socket));
      const auto rest = detail::lid_lines(p, EyePose{}, x);
      c.rest_inside[i] = rest.t > 0.0 ? detail::smooth01((y - rest.upper) / edge + 0.5) *
                                            detail::smooth01((rest.lower - y) / edge + 0.5)
                                      : 0.0;
      double t = 0.0;
      for (const auto& w : waves) t += w.amplitude * std::cos(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
      c.texture[i] = t;
    }
  return c;
}

namespace detail {

// exp(-a*a), treated as zero once it is below double rounding of the image.
inline double gauss(double a) { return std::abs(a) > 6.0 ? 0.0 : std::exp(-a * a); }

}  // namespace detail

/// Renders one eye as unclamped floats. With `appearance_field` on, the
/// participant's texture is added last, so it is an exact additive offset.
inline FloatImage render_eye_float(const EyeCanvas& c, const EyePose& pose, Gaze gaze, std::uint64_t noise_seed,
                                   const RenderOptions& options = {}) {
  const auto& p = *c.profile;
  FloatImage img(c.height, c.width);
  const double edge = 1.2 / static_cast<double>(c.height);
  const double nasal_sign = c.eye == Eye::left ? 1.0 : -1.0;
  const double hw = p.eye_half_width;
  const double iris_x = gaze.x * 0.45 * hw;
  const double iris_y = detail::kEyeCenterY + gaze.y * 0.35 * p.eye_aperture;
  const double crease_y = detail::kEyeCenterY + detail::kLowerLidRatio * p.eye_aperture + 0.07;
  Rng noise(noise_seed);

  for (std::size_t i = 0; i < c.height * c.width; ++i) {
    const double x = c.x[i], y = c.y[i];
    const double xn = x / hw;
    double v = c.base[i];

    // Brow arc.
    const double brow_y = detail::kEyeCenterY - p.brow_height - pose.brow_raise + p.brow_curve * xn * xn +
                          pose.brow_inner * std::clamp(nasal_sign * xn, 0.0, 1.3);
    const double brow_d = p.brow_thickness / 2.0 - std::abs(y - brow_y);
    if (brow_d > -edge) {
      const double brow_m = detail::smooth01(brow_d / edge + 0.5);
      const double brow_taper = detail::smooth01((1.3 - std::abs(xn)) / 0.15);
      v -= p.brow_darkness * brow_m * brow_taper;
    }

    // Lids, sclera, iris.
    const auto lids = detail::lid_lines(p, pose, x);
    if (lids.t > 0.0) {
      const double now_inside =
          detail::smooth01((y - lids.upper) / edge + 0.5) * detail::smooth01((lids.lower - y) / edge + 0.5);
      // Lid skin covering the neutral opening is shaded.
      v -= 0.12 * std::max(0.0, c.rest_inside[i] - now_inside);
      if (now_inside > 0.0) {
        const double d = std::hypot(x - iris_x, y - iris_y);
        const double iris_m = detail::smooth01((p.iris_radius - d) / edge + 0.5);
        const double pupil_m = detail::smooth01((0.4 * p.iris_radius - d) / edge + 0.5);
        double content = 0.9 * (1.0 - iris_m) + p.iris_intensity * iris_m;
        content = content * (1.0 - pupil_m) + 0.08 * pupil_m;
        v = v * (1.0 - now_inside) + content * now_inside;
      }
      const double root_t = std::sqrt(lids.t);
      v -= 0.3 * detail::gauss((y - lids.upper) / 0.012) * root_t;
      v -= 0.08 * detail::gauss((y - lids.lower) / 0.01) * root_t;
    }

    // Cheek-raise crease under the lower lid.
    if (pose.lower_lid > 0.0 && std::abs(xn) < 1.2) {
      const double cr = (y - crease_y + 0.02 * xn * xn) / 0.018;
      v -= 0.22 * pose.lower_lid * detail::gauss(cr) * detail::smooth01((1.2 - std::abs(xn)) / 0.2);
    }

    v *= c.session.gain;
    if (options.appearance_field) v += c.texture[i];
    if (options.noise) v += options.noise_sigma * noise.normal();
    img.pixels[i] = static_cast<float>(v);
  }
  return img;
}

inline FloatImage render_eye_float(const ParticipantProfile& p, const SessionContext& s, const EyePose& pose,
                                   Gaze gaze, Eye eye, const HmdSpec& hmd, std::uint64_t noise_seed,
                                   const RenderOptions& options = {}) {
  return render_eye_float(make_canvas(p, s, eye, hmd), pose, gaze, noise_seed, options);
}

/// Per-frame nuisance draws, fixed by (seed, participant, session, frame).
struct FrameDraws {
  Gaze gaze;
  double intensity = 1.0;
  std::uint64_t noise_seed_left = 0;
  std::uint64_t noise_seed_right = 0;
};

inline FrameDraws frame_draws(std::uint64_t global_seed, int participant_id, int session_id, int frame_index) {
  const std::uint64_t base = derive_seed(global_seed, {0x4652414DULL, static_cast<std::uint64_t>(participant_id),
                                                       static_cast<std::uint64_t>(session_id),
                                                       static_cast<std::uint64_t>(frame_index)});
  Rng rng(base);
  FrameDraws d;
  d.gaze = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  d.intensity = rng.uniform(0.85, 1.1);
  d.noise_seed_left = derive_seed(base, {0});
  d.noise_seed_right = derive_seed(base, {1});
  return d;
}

struct EyePair {
  GrayImage left;
  GrayImage right;
};

struct EyePairFloat {
  FloatImage left;
  FloatImage right;
};

/// Renders both eyes (unquantized). Sensor noise depends only on
/// (seed, participant, session, frame, eye), never on the label, so two
/// labels rendered at the same frame differ only where their geometry does.
inline EyePairFloat render_frame_float(const EyeCanvas& left, const EyeCanvas& right, const ExpressionPose& pose,
                                       Gaze gaze, int frame_index, const RenderOptions& options = {}) {
  const auto& p = *left.profile;
  const auto draws = frame_draws(p.global_seed, p.participant_id, left.session.session_id, frame_index);
  return {render_eye_float(left, pose.left, gaze, draws.noise_seed_left, options),
          render_eye_float(right, pose.right, gaze, draws.noise_seed_right, options)};
}

inline EyePairFloat render_frame_float(const ParticipantProfile& profile, const SessionContext& session,
                                       const ExpressionPose& pose, Gaze gaze, int frame_index, const HmdSpec& hmd,
                                       const RenderOptions& options = {}) {
  return render_frame_float(make_canvas(profile, session, Eye::left, hmd),
                            make_canvas(profile, session, Eye::right, hmd), pose, gaze, frame_index, options);
}

/// Renders the 8-bit eye pair for a labeled frame.
inline EyePair render_frame(const ParticipantProfile& profile, const SessionContext& session, const LabelSet& labels,
                            std::size_t label, Gaze gaze, int frame_index, const HmdSpec& hmd,
                            double intensity = 1.0) {
  if (label >= labels.size()) throw InputError("label index out of range");
  if (std::abs(gaze.x) > 1.0 || std::abs(gaze.y) > 1.0) throw InputError("gaze must lie in [-1, 1]^2");
  auto pose = expression_pose(labels, label);
  pose.left = scale_pose(pose.left, intensity);
  pose.right = scale_pose(pose.right, intensity);
  auto f = render_frame_float(profile, session, pose, gaze, frame_index, hmd);
  return {quantize(f.left), quantize(f.right)};
}

/// Renders manifest samples, keeping the canvases of the most recent
/// (participant, session, headset) so consecutive frames share them.
class SampleRenderer {
 public:
  explicit SampleRenderer(const GenConfig& config) : config_(config), labels_(config.labels()) {}

  /// Blink-flagged samples are rendered with both eyes closed on top of the
  /// labeled expression.
  EyePair render(const Sample& sample) {
    const auto key = std::tuple(sample.participant_id, sample.session_id, sample.hmd_id);
    if (!cache_ || cache_->key != key) {
      auto entry = std::make_unique<Entry>();
      entry->key = key;
      entry->profile = make_participant(config_.seed, sample.participant_id);
      const auto session = make_session(config_.seed, sample.participant_id, sample.session_id);
      const auto hmd = hmd_spec(sample.hmd_id);
      entry->left = make_canvas(entry->profile, session, Eye::left, hmd);
      entry->right = make_canvas(entry->profile, session, Eye::right, hmd);
      cache_ = std::move(entry);
    }
    const auto draws = frame_draws(config_.seed, sample.participant_id, sample.session_id, sample.frame_index);
    auto pose = expression_pose(labels_, labels_.index(sample.label));
    pose.left = scale_pose(pose.left, draws.intensity);
    pose.right = scale_pose(pose.right, draws.intensity);
    if (sample.blink_flag) pose.left.aperture = pose.right.aperture = 0.0;
    auto f = render_frame_float(cache_->left, cache_->right, pose, draws.gaze, sample.frame_index);
    return {quantize(f.left), quantize(f.right)};
  }

 private:
  struct Entry {
    std::tuple<int, int, int> key;
    ParticipantProfile profile;
    EyeCanvas left, right;
  };
  GenConfig config_;
  LabelSet labels_;
  std::unique_ptr<Entry> cache_;
};

inline EyePair render_sample(const GenConfig& config, const Sample& sample) {
  return SampleRenderer(config).render(sample);
}

/// Pixels inside the participant's neutral lid opening for a session; the
/// generator-side mask used by aperture statistics.
inline std::vector<std::size_t> aperture_mask(const ParticipantProfile& p, const SessionContext& s, const HmdSpec& hmd) {
  std::vector<std::size_t> mask;
  const detail::EyeFrame frame(s, hmd.eye_height, hmd.eye_width);
  for (std::size_t py = 0; py < hmd.eye_height; ++py)
    for (std::size_t px = 0; px < hmd.eye_width; ++px) {
      const auto [x, y] = frame.map(px, py);
      const auto lids = detail::lid_lines(p, EyePose{}, x);
      // Inner 80% of the opening, away from the lash line.
      const double margin = 0.1 * (lids.lower - lids.upper);
      if (lids.t > 0.0 && y > lids.upper + margin && y < lids.lower - margin) mask.push_back(py * hmd.eye_width + px);
    }
  return mask;
}

/// Mean intensity (in [0, 1]) of an 8-bit eye image over a mask.
inline double aperture_mean(const GrayImage& eye, const std::vector<std::size_t>& mask) {
  if (mask.empty()) throw InputError("empty aperture mask");
  double acc = 0.0;
  for (auto i : mask) acc += eye.pixels[i];
  return acc / (255.0 * static_cast<double>(mask.size()));
}

/// Minimum drop in aperture-region mean intensity from open to closed.
inline constexpr double kClosedApertureMargin = 0.08;

/// Frame plan for a dataset without pixel data: every sample with its label,
/// paths and frame index, in generation order.
inline std::vector<Sample> plan_dataset(const GenConfig& config) {
  config.validate();
  const auto labels = config.labels();
  const int per_class = config.resolved_frames_per_expression();
  const int enrollment = config.enrollment_frames();
  std::vector<Sample> samples;
  char buf[96];
  for (int pid = 0; pid < config.num_participants; ++pid) {
    // Participants who cannot perform a class skip it in every session.
    std::string skipped;
    if (config.label_set == LabelSetKind::au10) {
      Rng rng(derive_seed(config.seed, {0x534B4950ULL, static_cast<std::uint64_t>(pid)}));
      if (rng.uniform() < config.skip_fraction) skipped = rng.uniform() < 0.5 ? "LeftBrowRaise" : "RightBrowRaise";
    }
    for (int sid = 0; sid < config.sessions; ++sid) {
      int frame = 0;
      auto add = [&](const std::string& label) {
        Sample s;
        s.participant_id = pid;
        s.session_id = sid;
        s.hmd_id = config.hmd_id;
        s.label = label;
        s.frame_index = frame;
        std::snprintf(buf, sizeof buf, "images/p%03d_s%d_f%05d_L.pgm", pid, sid, frame);
        s.left_path = buf;
        std::snprintf(buf, sizeof buf, "images/p%03d_s%d_f%05d_R.pgm", pid, sid, frame);
        s.right_path = buf;
        samples.push_back(std::move(s));
        ++frame;
      };
      for (int i = 0; i < enrollment; ++i) add("Neutral");
      for (const auto& label : labels.classes()) {
        if (label == skipped) continue;
        for (int i = 0; i < per_class; ++i) add(label);
      }
    }
  }
  return samples;
}

/// Flags exactly floor(rate * n) frames of every non-closed class, where n
/// is the class's eligible frame count. The first `protected_neutral` neutral
/// frames of each (participant, session) are enrollment data and never
/// flagged.
inline void inject_blinks(std::vector<Sample>& samples, const LabelSet& labels, double blink_rate, std::uint64_t seed,
                          int protected_neutral = 0) {
  if (!(blink_rate >= 0.0 && blink_rate <= 0.2)) throw InputError("blink rate must be in [0, 0.2]");
  if (blink_rate == 0.0) return;
  std::vector<std::vector<std::size_t>> eligible(labels.size());
  const std::size_t neutral = labels.neutral();
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& x = samples[a];
    const auto& y = samples[b];
    return std::tie(x.participant_id, x.session_id, x.frame_index) <
           std::tie(y.participant_id, y.session_id, y.frame_index);
  });
  std::pair<int, int> current{-1, -1};
  int neutral_seen = 0;
  for (auto i : order) {
    const auto& s = samples[i];
    const std::size_t label = labels.index(s.label);
    if (label == labels.closed()) continue;
    if (std::pair{s.participant_id, s.session_id} != current) {
      current = {s.participant_id, s.session_id};
      neutral_seen = 0;
    }
    if (label == neutral && neutral_seen++ < protected_neutral) continue;
    eligible[label].push_back(i);
  }
  Rng rng(derive_seed(seed, {0x424C494EULL}));
  for (auto& pool : eligible) {
    const auto n_flag = static_cast<std::size_t>(std::floor(blink_rate * static_cast<double>(pool.size()) + 1e-9));
    rng.shuffle(pool);
    for (std::size_t k = 0; k < n_flag; ++k) samples[pool[k]].blink_flag = true;
  }
}

/// Renders and writes every planned sample plus `manifest.jsonl` under
/// `output_dir`. On failure, files written so far are removed.
inline std::vector<Sample> generate_dataset(const GenConfig& config, const std::filesystem::path& output_dir,
                                            double blink_rate = 0.0) {
  namespace fs = std::filesystem;
  auto samples = plan_dataset(config);
  if (blink_rate > 0.0) inject_blinks(samples, config.labels(), blink_rate, config.seed, config.enrollment_frames());
  std::vector<fs::path> written;
  try {
    fs::create_directories(output_dir / "images");
    SampleRenderer renderer(config);
    for (const auto& s : samples) {
      const auto pair = renderer.render(s);
      write_pgm(output_dir / s.left_path, pair.left);
      written.push_back(output_dir / s.left_path);
      write_pgm(output_dir / s.right_path, pair.right);
      written.push_back(output_dir / s.right_path);
    }
    write_manifest(output_dir / "manifest.jsonl", samples);
  } catch (...) {
    std::error_code ec;
    for (const auto& p : written) fs::remove(p, ec);
    fs::remove(output_dir / "manifest.jsonl", ec);
    throw;
  }
  return samples;
}

}  // namespace eyemotion
