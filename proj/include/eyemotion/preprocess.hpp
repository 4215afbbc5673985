#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "eyemotion/error.hpp"
#include "eyemotion/image.hpp"
#include "eyemotion/rng.hpp"
#include "eyemotion/tensor.hpp"

namespace eyemotion {

struct ImageSize {
  std::size_t height = 64;
  std::size_t width = 128;

  friend bool operator==(const ImageSize&, const ImageSize&) = default;

  std::string to_string() const { return std::to_string(height) + "x" + std::to_string(width); }

  /// Parses "HxW".
  static ImageSize parse(const std::string& text) {
    const auto x = text.find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument("no separator");
      std::size_t used = 0;
      ImageSize s{std::stoul(text.substr(0, x), &used), 0};
      if (used != x) throw std::invalid_argument("height");
      const auto rest = text.substr(x + 1);
      s.width = std::stoul(rest, &used);
      if (used != rest.size() || s.height == 0 || s.width == 0) throw std::invalid_argument("width");
      return s;
    } catch (const std::exception&) {
      throw InputError("image size must look like HxW, got '" + text + "'");
    }
  }
};

struct Provenance {
  int participant_id = -1;
  int session_id = -1;
  int frame_index = -1;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Rectified, concatenated (left | right) single-channel frame. Pixels are in
/// [0, 1].
struct EyePairImage {
  FloatImage pixels;
  Provenance provenance;
};

/// Bilinear resampling with pixel-center alignment and edge clamping.
inline FloatImage resize_bilinear(const FloatImage& src, std::size_t out_h, std::size_t out_w) {
  FloatImage out(out_h, out_w);
  const double sy = static_cast<double>(src.height) / static_cast<double>(out_h);
  const double sx = static_cast<double>(src.width) / static_cast<double>(out_w);
  for (std::size_t y = 0; y < out_h; ++y) {
    const double fy = std::clamp((static_cast<double>(y) + 0.5) * sy - 0.5, 0.0, static_cast<double>(src.height - 1));
    const auto y0 = static_cast<std::size_t>(fy);
    const auto y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double fx = std::clamp((static_cast<double>(x) + 0.5) * sx - 0.5, 0.0, static_cast<double>(src.width - 1));
      const auto x0 = static_cast<std::size_t>(fx);
      const auto x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - static_cast<double>(x0);
      const double top = src.at(y0, x0) * (1.0 - wx) + src.at(y0, x1) * wx;
      const double bottom = src.at(y1, x0) * (1.0 - wx) + src.at(y1, x1) * wx;
      out.at(y, x) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
    }
  }
  return out;
}

namespace detail {

template <typename Pixel>
Image<Pixel> center_crop_square(const Image<Pixel>& img) {
  const std::size_t side = std::min(img.height, img.width);
  if (side == img.height && side == img.width) return img;
  const std::size_t y0 = (img.height - side) / 2, x0 = (img.width - side) / 2;
  Image<Pixel> out(side, side);
  for (std::size_t y = 0; y < side; ++y)
    std::copy_n(img.pixels.begin() + static_cast<std::ptrdiff_t>((y0 + y) * img.width + x0), side,
                out.pixels.begin() + static_cast<std::ptrdiff_t>(y * side));
  return out;
}

inline FloatImage concat_horizontal(const FloatImage& l, const FloatImage& r) {
  FloatImage out(l.height, l.width + r.width);
  for (std::size_t y = 0; y < l.height; ++y) {
    std::copy_n(&l.pixels[y * l.width], l.width, &out.pixels[y * out.width]);
    std::copy_n(&r.pixels[y * r.width], r.width, &out.pixels[y * out.width + l.width]);
  }
  return out;
}

}  // namespace detail

/// Builds the network input from already-normalized eye images: per-eye
/// center crop to a square, left | right concatenation, bilinear resize.
inline EyePairImage rectify_and_concat(const FloatImage& left, const FloatImage& right, ImageSize target,
                                       Provenance provenance = {}) {
  if (left.height != right.height || left.width != right.width) {
    throw InputError("eye images differ in size: " + std::to_string(left.height) + "x" + std::to_string(left.width) +
                     " vs " + std::to_string(right.height) + "x" + std::to_string(right.width));
  }
  if (left.height == 0 || left.width == 0) throw InputError("empty eye image");
  if (target.height == 0 || target.width == 0) throw InputError("target size must be positive");
  auto joined = detail::concat_horizontal(detail::center_crop_square(left), detail::center_crop_square(right));
  if (joined.height == target.height && joined.width == target.width) return {std::move(joined), provenance};
  return {resize_bilinear(joined, target.height, target.width), provenance};
}

/// 8-bit overload; intensities are normalized by 1/255.
inline EyePairImage rectify_and_concat(const GrayImage& left, const GrayImage& right, ImageSize target,
                                       Provenance provenance = {}) {
  if (left.height != right.height || left.width != right.width) {
    throw InputError("eye images differ in size: " + std::to_string(left.height) + "x" + std::to_string(left.width) +
                     " vs " + std::to_string(right.height) + "x" + std::to_string(right.width));
  }
  return rectify_and_concat(normalize(detail::center_crop_square(left)), normalize(detail::center_crop_square(right)),
                            target, provenance);
}

/// Augmentation bounds. Rotation is +/- degrees; scale and brightness are
/// +/- fractions around 1. Flips are never applied.
struct AugmentConfig {
  double rotation_deg = 3.6;
  double scale = 0.02;
  double brightness = 0.02;
  std::uint64_t seed = 0;

  static AugmentConfig none() { return {0.0, 0.0, 0.0, 0}; }
};

struct AugmentDraw {
  double rotation_deg = 0.0;
  double scale = 1.0;
  double brightness = 1.0;
};

inline AugmentDraw draw_augment(const AugmentConfig& config, Rng& rng) {
  AugmentDraw d;
  d.rotation_deg = rng.uniform(-config.rotation_deg, config.rotation_deg);
  d.scale = rng.uniform(1.0 - config.scale, 1.0 + config.scale);
  d.brightness = rng.uniform(1.0 - config.brightness, 1.0 + config.brightness);
  return d;
}

/// Rotates and scales about the image center, multiplies brightness, and
/// clamps to [0, 1]. Sampling is bilinear with edge clamping.
inline EyePairImage augment(const EyePairImage& image, const AugmentDraw& draw) {
  const auto& src = image.pixels;
  EyePairImage out{FloatImage(src.height, src.width), image.provenance};
  const double cx = (static_cast<double>(src.width) - 1.0) / 2.0;
  const double cy = (static_cast<double>(src.height) - 1.0) / 2.0;
  const double r = draw.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(r) / draw.scale, s = std::sin(r) / draw.scale;
  const double max_x = static_cast<double>(src.width - 1), max_y = static_cast<double>(src.height - 1);
  for (std::size_t y = 0; y < src.height; ++y) {
    const double v = static_cast<double>(y) - cy;
    for (std::size_t x = 0; x < src.width; ++x) {
      const double u = static_cast<double>(x) - cx;
      // Inverse map: output pixel -> source location.
      const double fx = std::clamp(cx + c * u + s * v, 0.0, max_x);
      const double fy = std::clamp(cy - s * u + c * v, 0.0, max_y);
      const auto x0 = static_cast<std::size_t>(fx), y0 = static_cast<std::size_t>(fy);
      const auto x1 = std::min(x0 + 1, src.width - 1), y1 = std::min(y0 + 1, src.height - 1);
      const double wx = fx - static_cast<double>(x0), wy = fy - static_cast<double>(y0);
      const double top = src.at(y0, x0) * (1.0 - wx) + src.at(y0, x1) * wx;
      const double bottom = src.at(y1, x0) * (1.0 - wx) + src.at(y1, x1) * wx;
      const double value = (top * (1.0 - wy) + bottom * wy) * draw.brightness;
      out.pixels.at(y, x) = static_cast<float>(std::clamp(value, 0.0, 1.0));
    }
  }
  return out;
}

inline EyePairImage augment(const EyePairImage& image, const AugmentConfig& config, Rng& rng) {
  return augment(image, draw_augment(config, rng));
}

/// Mean neutral image of one (participant, session).
struct PersonalizationProfile {
  int participant_id = -1;
  int session_id = -1;
  FloatImage mean_neutral;
  std::size_t source_frame_count = 0;
};

/// Number of leading neutral frames that make up the enrollment window.
inline std::size_t enrollment_window(double frame_rate, double seconds = 5.0) {
  return static_cast<std::size_t>(std::lround(frame_rate * seconds));
}

/// Element-wise mean of the earliest min(seconds * frame_rate, available)
/// frames, accumulated in double in list order.
inline PersonalizationProfile build_profile(std::span<const EyePairImage> neutral_frames, double frame_rate,
                                            double seconds = 5.0) {
  if (neutral_frames.empty()) throw InputError("no neutral data for personalization");
  const std::size_t count = std::min(std::max<std::size_t>(1, enrollment_window(frame_rate, seconds)), neutral_frames.size());
  const auto& first = neutral_frames.front().pixels;
  std::vector<double> acc(first.pixels.size(), 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& img = neutral_frames[i].pixels;
    if (img.height != first.height || img.width != first.width) throw InputError("neutral frames differ in size");
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += img.pixels[j];
  }
  PersonalizationProfile profile;
  profile.participant_id = neutral_frames.front().provenance.participant_id;
  profile.session_id = neutral_frames.front().provenance.session_id;
  profile.source_frame_count = count;
  profile.mean_neutral = FloatImage(first.height, first.width);
  for (std::size_t j = 0; j < acc.size(); ++j) {
    profile.mean_neutral.pixels[j] = static_cast<float>(acc[j] / static_cast<double>(count));
  }
  return profile;
}

using WarningSink = std::function<void(std::string_view)>;

inline void default_warning(std::string_view message) { std::cerr << "warning: " << message << '\n'; }

/// I - mean_neutral, element-wise, without clamping. Applying another
/// participant's profile is allowed (ablations) but reported to `warn`.
inline FloatImage personalize(const EyePairImage& image, const PersonalizationProfile& profile,
                              const WarningSink& warn = default_warning) {
  const auto& img = image.pixels;
  const auto& mean = profile.mean_neutral;
  if (img.height != mean.height || img.width != mean.width) {
    throw InputError("image " + std::to_string(img.height) + "x" + std::to_string(img.width) +
                     " does not match profile " + std::to_string(mean.height) + "x" + std::to_string(mean.width));
  }
  const auto& src = image.provenance;
  if (warn && src.participant_id >= 0 && profile.participant_id >= 0 &&
      (src.participant_id != profile.participant_id || src.session_id != profile.session_id)) {
    warn("applying profile of participant " + std::to_string(profile.participant_id) + " session " +
         std::to_string(profile.session_id) + " to a frame of participant " + std::to_string(src.participant_id) +
         " session " + std::to_string(src.session_id));
  }
  FloatImage out(img.height, img.width);
  for (std::size_t j = 0; j < img.pixels.size(); ++j) out.pixels[j] = img.pixels[j] - mean.pixels[j];
  return out;
}

/// Single-channel network input [1, H, W].
inline Tensor<float> to_tensor(const FloatImage& img) {
  return Tensor<float>(Shape{1, img.height, img.width}, img.pixels);
}

// Profile file: "EYEP", u16 version, u16 height, u16 width, then row-major
// little-endian f32 values.

inline constexpr std::uint16_t kProfileVersion = 1;

namespace detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in, const std::string& what) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (in.gcount() != static_cast<std::streamsize>(sizeof v)) throw FormatError(what + ": unexpected end of file");
  return v;
}

}  // namespace detail

inline void save_profile(const std::filesystem::path& path, const PersonalizationProfile& profile) {
  const auto& m = profile.mean_neutral;
  if (m.height > 0xFFFF || m.width > 0xFFFF) throw InputError("profile too large for the file format");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write("EYEP", 4);
  detail::put<std::uint16_t>(out, kProfileVersion);
  detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(m.height));
  detail::put<std::uint16_t>(out, static_cast<std::uint16_t>(m.width));
  out.write(reinterpret_cast<const char*>(m.pixels.data()), static_cast<std::streamsize>(m.pixels.size() * sizeof(float)));
  if (!out) throw IoError("failed writing " + path.string());
}

inline PersonalizationProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string name = path.string();
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "EYEP", 4) != 0) throw FormatError(name + ": bad profile magic");
  const auto version = detail::get<std::uint16_t>(in, name);
  if (version != kProfileVersion) throw FormatError(name + ": unsupported profile version " + std::to_string(version));
  const auto h = detail::get<std::uint16_t>(in, name);
  const auto w = detail::get<std::uint16_t>(in, name);
  if (h == 0 || w == 0) throw FormatError(name + ": empty profile");
  PersonalizationProfile p;
  p.mean_neutral = FloatImage(h, w);
  const auto bytes = static_cast<std::streamsize>(p.mean_neutral.pixels.size() * sizeof(float));
  in.read(reinterpret_cast<char*>(p.mean_neutral.pixels.data()), bytes);
  if (in.gcount() != bytes) throw FormatError(name + ": truncated profile data");
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(name + ": trailing bytes after profile data");
  return p;
}

}  // namespace eyemotion
