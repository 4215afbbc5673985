#pragma once

// Checkpoint layout (little-endian):
//   "EYEM" | u16 version | u32 descriptor length | descriptor (canonical JSON)
//   | u32 tensor count | per tensor: u8 rank, u32 dims[rank], f32 data
// The descriptor holds the input shape, layer list, class names, the
// personalization flag and training metadata.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eyemotion/error.hpp"
#include "eyemotion/network.hpp"
#include "eyemotion/preprocess.hpp"
#include "eyemotion/training.hpp"

namespace eyemotion {

inline constexpr std::uint16_t kCheckpointVersion = 1;

inline nlohmann::json layer_to_json(const LayerSpec& l) {
  nlohmann::json j = {{"kind", to_string(l.kind)}};
  if (l.kind == LayerKind::conv2d) {
    j["in_channels"] = l.in_channels;
    j["out_channels"] = l.out_channels;
    j["kernel"] = l.kernel;
    j["padding"] = l.padding;
  } else if (l.kind == LayerKind::dense) {
    j["in_features"] = l.in_features;
    j["out_features"] = l.out_features;
  }
  return j;
}

inline LayerSpec layer_from_json(const nlohmann::json& j) {
  LayerSpec l;
  l.kind = parse_layer_kind(j.at("kind").get<std::string>());
  if (l.kind == LayerKind::conv2d) {
    l.in_channels = j.at("in_channels").get<std::size_t>();
    l.out_channels = j.at("out_channels").get<std::size_t>();
    l.kernel = j.at("kernel").get<std::size_t>();
    l.padding = j.at("padding").get<std::size_t>();
  } else if (l.kind == LayerKind::dense) {
    l.in_features = j.at("in_features").get<std::size_t>();
    l.out_features = j.at("out_features").get<std::size_t>();
  }
  return l;
}

inline std::string checkpoint_descriptor(const Classifier& model) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : model.net.layers()) layers.push_back(layer_to_json(l));
  const auto& in = model.net.input_shape();
  const nlohmann::json d = {{"input", {{"channels", in.channels}, {"height", in.height}, {"width", in.width}}},
                            {"layers", layers},
                            {"classes", model.labels.classes()},
                            {"personalized", model.personalized},
                            {"meta", model.meta}};
  return d.dump();
}

/// Exact file size for a model: header, descriptor and every tensor record.
inline std::size_t checkpoint_size(const Classifier& model) {
  std::size_t n = 4 + 2 + 4 + checkpoint_descriptor(model).size() + 4;
  for (const auto& t : model.net.parameters()) n += 1 + 4 * t.rank() + 4 * t.size();
  return n;
}

inline void save_checkpoint(const Classifier& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  const auto descriptor = checkpoint_descriptor(model);
  out.write("EYEM", 4);
  detail::put<std::uint16_t>(out, kCheckpointVersion);
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(descriptor.size()));
  out.write(descriptor.data(), static_cast<std::streamsize>(descriptor.size()));
  const auto& params = model.net.parameters();
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& t : params) {
    detail::put<std::uint8_t>(out, static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

inline Classifier load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  const std::string name = path.string();
  const auto file_size = std::filesystem::file_size(path);

  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "EYEM", 4) != 0) throw FormatError(name + ": bad checkpoint magic");
  const auto version = detail::get<std::uint16_t>(in, name);
  if (version != kCheckpointVersion) {
    throw FormatError(name + ": unsupported checkpoint version " + std::to_string(version));
  }
  const auto desc_len = detail::get<std::uint32_t>(in, name);
  if (desc_len > file_size) throw FormatError(name + ": descriptor length exceeds file size");
  std::string descriptor(desc_len, '\0');
  in.read(descriptor.data(), desc_len);
  if (in.gcount() != static_cast<std::streamsize>(desc_len)) throw FormatError(name + ": truncated descriptor");

  Classifier model;
  try {
    const auto d = nlohmann::json::parse(descriptor);
    const auto& input = d.at("input");
    std::vector<LayerSpec> layers;
    for (const auto& l : d.at("layers")) layers.push_back(layer_from_json(l));
    model.net = Network<float>({input.at("channels").get<std::size_t>(), input.at("height").get<std::size_t>(),
                                input.at("width").get<std::size_t>()},
                               std::move(layers));
    model.labels = LabelSet::from_classes(d.at("classes").get<std::vector<std::string>>());
    model.personalized = d.at("personalized").get<bool>();
    model.meta = d.at("meta");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(name + ": invalid descriptor: " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(name + ": invalid architecture: " + e.what());
  }

  auto& params = model.net.parameters();
  const auto count = detail::get<std::uint32_t>(in, name);
  if (count != params.size()) {
    throw FormatError(name + ": expected " + std::to_string(params.size()) + " tensors, found " + std::to_string(count));
  }
  for (std::size_t t = 0; t < params.size(); ++t) {
    const auto rank = detail::get<std::uint8_t>(in, name);
    Shape shape(rank);
    for (auto& dim : shape) dim = detail::get<std::uint32_t>(in, name);
    if (shape != params[t].shape()) {
      throw FormatError(name + ": tensor " + std::to_string(t) + " has shape " + shape_string(shape) + ", expected " +
                        shape_string(params[t].shape()));
    }
    const auto bytes = static_cast<std::streamsize>(params[t].size() * sizeof(float));
    in.read(reinterpret_cast<char*>(params[t].data()), bytes);
    if (in.gcount() != bytes) throw FormatError(name + ": truncated tensor " + std::to_string(t));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(name + ": trailing bytes after last tensor");
  return model;
}

}  // namespace eyemotion
