#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "eyemotion/error.hpp"

namespace eyemotion {

enum class LabelSetKind { au10, emo5, blink };

/// Ordered class vocabulary. The order is shared by generation, training,
/// checkpoints and reports.
class LabelSet {
 public:
  static LabelSet au10() {
    return LabelSet(LabelSetKind::au10,
                    {"Neutral", "LeftBrowRaise", "RightBrowRaise", "BrowLower", "UpperLidRaise", "Squint",
                     "EyesClosed", "LeftWink", "RightWink", "CheekRaise"},
                    "EyesClosed");
  }

  static LabelSet emo5() {
    return LabelSet(LabelSetKind::emo5, {"Anger", "ClosedEyes", "Happiness", "Neutral", "Surprise"},
                    "ClosedEyes");
  }

  /// Two-class eyes-open / eyes-closed vocabulary of the blink classifier.
  static LabelSet blink() { return LabelSet(LabelSetKind::blink, {"EyesOpen", "EyesClosed"}, "EyesClosed"); }

  static LabelSet of(LabelSetKind kind) {
    switch (kind) {
      case LabelSetKind::au10: return au10();
      case LabelSetKind::emo5: return emo5();
      case LabelSetKind::blink: return blink();
    }
    return emo5();
  }

  static LabelSet parse(const std::string& name) {
    if (name == "au10") return au10();
    if (name == "emo5") return emo5();
    throw InputError("unknown label set '" + name + "' (expected au10 or emo5)");
  }

  /// Recovers a label set from its class list (checkpoints store names).
  static LabelSet from_classes(const std::vector<std::string>& classes) {
    for (auto k : {LabelSetKind::au10, LabelSetKind::emo5, LabelSetKind::blink}) {
      auto ls = of(k);
      if (ls.classes() == classes) return ls;
    }
    throw FormatError("class list does not match a known label set");
  }

  LabelSetKind kind() const { return kind_; }
  std::string name() const {
    return kind_ == LabelSetKind::au10 ? "au10" : (kind_ == LabelSetKind::emo5 ? "emo5" : "blink");
  }
  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  const std::string& operator[](std::size_t i) const { return classes_.at(i); }

  std::optional<std::size_t> find(const std::string& name) const {
    auto it = std::find(classes_.begin(), classes_.end(), name);
    if (it == classes_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - classes_.begin());
  }

  std::size_t index(const std::string& name) const {
    if (auto i = find(name)) return *i;
    throw InputError("label '" + name + "' is not in label set " + this->name());
  }

  std::size_t neutral() const { return index("Neutral"); }
  std::size_t closed() const { return index(closed_); }

  friend bool operator==(const LabelSet& a, const LabelSet& b) { return a.kind_ == b.kind_; }

 private:
  LabelSet(LabelSetKind kind, std::vector<std::string> classes, std::string closed)
      : kind_(kind), classes_(std::move(classes)), closed_(std::move(closed)) {}

  LabelSetKind kind_;
  std::vector<std::string> classes_;
  std::string closed_;
};

}  // namespace eyemotion
