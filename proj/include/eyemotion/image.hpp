#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "eyemotion/error.hpp"

namespace eyemotion {

/// Single-channel row-major raster.
template <typename Pixel>
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Pixel> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, Pixel fill = Pixel{}) : height(h), width(w), pixels(h * w, fill) {}

  Pixel& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
  const Pixel& at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

  friend bool operator==(const Image&, const Image&) = default;
};

using GrayImage = Image<std::uint8_t>;
using FloatImage = Image<float>;

/// Writes an 8-bit binary PGM (P5).
inline void write_pgm(const std::filesystem::path& path, const GrayImage& img) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "P5\n" << img.width << ' ' << img.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

namespace detail {

inline std::size_t read_pgm_token(std::istream& in, const std::string& name) {
  std::string token;
  while (in) {
    const int c = in.peek();
    if (c == '#') {
      std::string ignored;
      std::getline(in, ignored);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  in >> token;
  if (token.empty() || token.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError(name + ": malformed PGM header");
  }
  return std::stoul(token);
}

}  // namespace detail

inline GrayImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const auto width = detail::read_pgm_token(in, path.string());
  const auto height = detail::read_pgm_token(in, path.string());
  const auto maxval = detail::read_pgm_token(in, path.string());
  if (maxval != 255) throw FormatError(path.string() + ": only 8-bit PGM is supported");
  if (width == 0 || height == 0) throw FormatError(path.string() + ": empty image");
  in.get();  // single whitespace before the raster
  GrayImage img(height, width);
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw FormatError(path.string() + ": truncated raster");
  }
  return img;
}

/// Maps [0, 1] floats to 8-bit with rounding; values outside are clamped.
inline GrayImage quantize(const FloatImage& img) {
  GrayImage out(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    float v = img.pixels[i];
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    out.pixels[i] = static_cast<std::uint8_t>(v * 255.0f + 0.5f);
  }
  return out;
}

inline FloatImage normalize(const GrayImage& img) {
  FloatImage out(img.height, img.width);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = static_cast<float>(img.pixels[i]) / 255.0f;
  return out;
}

}  // namespace eyemotion
