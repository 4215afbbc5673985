#pragma once

// Canonical run configuration shared by every subcommand. The JSON form is
// the config-file format; parsing starts from defaults, overlays the file,
// and rejects keys it does not know.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "eyemotion/error.hpp"
#include "eyemotion/evaluation.hpp"
#include "eyemotion/synthgen.hpp"
#include "eyemotion/training.hpp"

namespace eyemotion {

enum class PersonalizeMode { on, off, both };

inline std::string to_string(PersonalizeMode m) {
  return m == PersonalizeMode::on ? "on" : (m == PersonalizeMode::off ? "off" : "both");
}

inline PersonalizeMode parse_personalize(const std::string& s) {
  if (s == "on") return PersonalizeMode::on;
  if (s == "off") return PersonalizeMode::off;
  if (s == "both") return PersonalizeMode::both;
  throw ConfigError("personalize must be on, off or both, got '" + s + "'");
}

inline std::string to_string(SessionWeighting w) { return w == SessionWeighting::equal ? "equal" : "per_frame"; }

inline SessionWeighting parse_weighting(const std::string& s) {
  if (s == "equal") return SessionWeighting::equal;
  if (s == "per_frame") return SessionWeighting::per_frame;
  throw ConfigError("session weighting must be equal or per_frame, got '" + s + "'");
}

inline std::string label_set_name(LabelSetKind k) { return LabelSet::of(k).name(); }

inline LabelSetKind parse_label_set_kind(const std::string& s) {
  if (s == "au10") return LabelSetKind::au10;
  if (s == "emo5") return LabelSetKind::emo5;
  throw ConfigError("label set must be au10 or emo5, got '" + s + "'");
}

struct RunConfig {
  std::uint64_t seed = 0;
  GenConfig gen{};
  double blink_rate = 0.0;
  TrainConfig train{};
  PersonalizeMode personalize = PersonalizeMode::on;
  std::size_t k = 5;
  std::size_t seeds = 1;
  SessionWeighting weighting = SessionWeighting::equal;
  unsigned workers = 1;
  double alpha = 0.3;
  bool blink_filter = false;
  double blink_threshold = 0.5;

  /// Copies the run seed into the generator and trainer.
  void propagate_seed() {
    gen.seed = seed;
    train.seed = seed;
    train.augment.seed = seed;
  }

  void validate() const {
    gen.validate();
    train.validate();
    if (blink_rate < 0 || blink_rate > 0.2) throw ConfigError("blink rate must be in [0, 0.2]");
    if (k < 2) throw ConfigError("k must be at least 2");
    if (seeds < 1) throw ConfigError("need at least one seed");
    if (workers < 1) throw ConfigError("need at least one worker");
    if (!(alpha > 0 && alpha <= 1)) throw ConfigError("alpha must be in (0, 1]");
    if (!(blink_threshold > 0 && blink_threshold < 1)) throw ConfigError("blink threshold must be in (0, 1)");
    if (train.augment.rotation_deg < 0 || train.augment.scale < 0 || train.augment.brightness < 0) {
      throw ConfigError("augmentation bounds must be non-negative");
    }
  }

  nlohmann::json to_json() const {
    return {{"seed", seed},
            {"gen",
             {{"participants", gen.num_participants},
              {"sessions", gen.sessions},
              {"frames_per_expression", gen.frames_per_expression},
              {"frame_rate", gen.frame_rate},
              {"enrollment_seconds", gen.enrollment_seconds},
              {"hmd", gen.hmd_id},
              {"label_set", label_set_name(gen.label_set)},
              {"skip_fraction", gen.skip_fraction},
              {"blink_rate", blink_rate}}},
            {"train",
             {{"initial_lr", train.initial_lr},
              {"lr_decay", train.lr_decay},
              {"l2_lambda", train.l2_lambda},
              {"batch_size", train.batch_size},
              {"epochs", train.epochs},
              {"input_size", train.input_size.to_string()},
              {"momentum", train.momentum},
              {"rms_decay", train.rms_decay},
              {"epsilon", train.epsilon},
              {"personalize", to_string(personalize)}}},
            {"augment",
             {{"rotation_deg", train.augment.rotation_deg},
              {"scale", train.augment.scale},
              {"brightness", train.augment.brightness}}},
            {"eval", {{"k", k}, {"seeds", seeds}, {"session_weighting", to_string(weighting)}, {"workers", workers}}},
            {"runtime", {{"alpha", alpha}}},
            {"blink", {{"filter", blink_filter}, {"threshold", blink_threshold}}}};
  }
};

namespace detail {

inline void reject_unknown(const nlohmann::json& given, const nlohmann::json& known, const std::string& where) {
  if (!given.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : given.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key '" + where + key + "'");
    if (known[key].is_object()) reject_unknown(value, known[key], where + key + ".");
  }
}

}  // namespace detail

/// Overlays a JSON document on `base`. Unknown keys and wrongly typed values
/// are config errors.
inline RunConfig run_config_from_json(const nlohmann::json& doc, RunConfig base = {}) {
  detail::reject_unknown(doc, base.to_json(), "");
  nlohmann::json j = base.to_json();
  j.merge_patch(doc);
  RunConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    const auto& g = j.at("gen");
    c.gen.num_participants = g.at("participants").get<int>();
    c.gen.sessions = g.at("sessions").get<int>();
    c.gen.frames_per_expression = g.at("frames_per_expression").get<int>();
    c.gen.frame_rate = g.at("frame_rate").get<double>();
    c.gen.enrollment_seconds = g.at("enrollment_seconds").get<double>();
    c.gen.hmd_id = g.at("hmd").get<int>();
    c.gen.label_set = parse_label_set_kind(g.at("label_set").get<std::string>());
    c.gen.skip_fraction = g.at("skip_fraction").get<double>();
    c.blink_rate = g.at("blink_rate").get<double>();
    const auto& t = j.at("train");
    c.train.initial_lr = t.at("initial_lr").get<double>();
    c.train.lr_decay = t.at("lr_decay").get<double>();
    c.train.l2_lambda = t.at("l2_lambda").get<double>();
    c.train.batch_size = t.at("batch_size").get<std::size_t>();
    c.train.epochs = t.at("epochs").get<std::size_t>();
    c.train.input_size = ImageSize::parse(t.at("input_size").get<std::string>());
    c.train.momentum = t.at("momentum").get<double>();
    c.train.rms_decay = t.at("rms_decay").get<double>();
    c.train.epsilon = t.at("epsilon").get<double>();
    c.personalize = parse_personalize(t.at("personalize").get<std::string>());
    const auto& a = j.at("augment");
    c.train.augment.rotation_deg = a.at("rotation_deg").get<double>();
    c.train.augment.scale = a.at("scale").get<double>();
    c.train.augment.brightness = a.at("brightness").get<double>();
    const auto& e = j.at("eval");
    c.k = e.at("k").get<std::size_t>();
    c.seeds = e.at("seeds").get<std::size_t>();
    c.weighting = parse_weighting(e.at("session_weighting").get<std::string>());
    c.workers = e.at("workers").get<unsigned>();
    c.alpha = j.at("runtime").at("alpha").get<double>();
    c.blink_filter = j.at("blink").at("filter").get<bool>();
    c.blink_threshold = j.at("blink").at("threshold").get<double>();
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(std::string("bad config value: ") + ex.what());
  } catch (const InputError& ex) {
    throw ConfigError(ex.what());
  }
  c.propagate_seed();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw ConfigError(path.string() + ": " + ex.what());
  }
  return run_config_from_json(doc);
}

/// Writes the effective configuration as `config.resolved.json`.
inline void write_resolved_config(const std::filesystem::path& dir, const RunConfig& config) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "config.resolved.json");
  if (!out) throw IoError("cannot write " + (dir / "config.resolved.json").string());
  out << config.to_json().dump(2) << '\n';
}

}  // namespace eyemotion
