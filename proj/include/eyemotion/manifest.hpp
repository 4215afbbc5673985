#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eyemotion/error.hpp"

namespace eyemotion {

/// One labeled frame. Image paths are relative to the manifest's directory.
struct Sample {
  int participant_id = 0;
  int session_id = 0;
  int hmd_id = 1;
  std::string label;
  std::string left_path;
  std::string right_path;
  int frame_index = 0;
  bool blink_flag = false;

  friend bool operator==(const Sample&, const Sample&) = default;
};

inline nlohmann::json to_json(const Sample& s) {
  return {{"participant_id", s.participant_id}, {"session_id", s.session_id}, {"hmd_id", s.hmd_id},
          {"label", s.label},                   {"left_path", s.left_path},   {"right_path", s.right_path},
          {"frame_index", s.frame_index},       {"blink_flag", s.blink_flag}};
}

inline Sample sample_from_json(const nlohmann::json& j) {
  static const std::vector<std::string> keys = {"participant_id", "session_id", "hmd_id",      "label",
                                                "left_path",      "right_path", "frame_index", "blink_flag"};
  if (!j.is_object() || j.size() != keys.size()) throw FormatError("manifest line must have exactly 8 fields");
  for (const auto& k : keys) {
    if (!j.contains(k)) throw FormatError("manifest line missing field '" + k + "'");
  }
  try {
    Sample s;
    s.participant_id = j.at("participant_id").get<int>();
    s.session_id = j.at("session_id").get<int>();
    s.hmd_id = j.at("hmd_id").get<int>();
    s.label = j.at("label").get<std::string>();
    s.left_path = j.at("left_path").get<std::string>();
    s.right_path = j.at("right_path").get<std::string>();
    s.frame_index = j.at("frame_index").get<int>();
    s.blink_flag = j.at("blink_flag").get<bool>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest field has wrong type: ") + e.what());
  }
}

struct Manifest {
  std::vector<Sample> samples;
  /// Directory image paths are resolved against.
  std::filesystem::path root;
};

inline void write_manifest(const std::filesystem::path& path, const std::vector<Sample>& samples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  for (const auto& s : samples) out << to_json(s).dump() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

/// Reads a JSON-lines manifest. Accepts either the file or the directory
/// containing `manifest.jsonl`.
inline Manifest read_manifest(std::filesystem::path path) {
  if (std::filesystem::is_directory(path)) path /= "manifest.jsonl";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  Manifest m;
  m.root = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      m.samples.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return m;
}

}  // namespace eyemotion
