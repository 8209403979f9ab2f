#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gobs/core/error.hpp"

namespace gobs {

enum class Speaker { human, agent };

inline std::string_view to_string(Speaker s) { return s == Speaker::human ? "human" : "agent"; }

inline Speaker parse_speaker(std::string_view s) {
  if (s == "human") return Speaker::human;
  if (s == "agent") return Speaker::agent;
  throw Error("unknown speaker '" + std::string(s) + "'");
}

struct Turn {
  Speaker speaker = Speaker::human;
  std::string text;
  std::size_t index = 0;
  std::optional<std::int64_t> timestamp_ms;  // UTC, unix epoch
  bool placeholder = false;                  // only placeholders may have empty text

  bool operator==(const Turn&) const = default;
};

struct Conversation {
  std::string id;
  std::vector<Turn> turns;
  std::map<std::string, std::string> metadata;

  // Appends a turn with the next contiguous index.
  Turn& append(Speaker speaker, std::string text, std::optional<std::int64_t> ts = std::nullopt) {
    turns.push_back(Turn{speaker, std::move(text), turns.size(), ts, false});
    return turns.back();
  }

  bool operator==(const Conversation&) const = default;
};

// Checks contiguous indices and the empty-text rule.
inline void validate_conversation(const Conversation& c) {
  for (std::size_t i = 0; i < c.turns.size(); ++i) {
    const Turn& t = c.turns[i];
    if (t.index != i)
      throw Error("conversation '" + c.id + "': turn index " + std::to_string(t.index) +
                  " at position " + std::to_string(i));
    if (t.text.empty() && !t.placeholder)
      throw Error("conversation '" + c.id + "': empty text at turn " + std::to_string(i));
  }
}

enum class Feature { brevity, tone, specificity, coherence, assistance };

inline constexpr std::array<Feature, 5> kAllFeatures = {Feature::brevity, Feature::tone,
                                                        Feature::specificity, Feature::coherence,
                                                        Feature::assistance};

inline std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::brevity: return "brevity";
    case Feature::tone: return "tone";
    case Feature::specificity: return "specificity";
    case Feature::coherence: return "coherence";
    case Feature::assistance: return "assistance";
  }
  return "?";
}

inline std::optional<Feature> parse_feature(std::string_view s) {
  for (Feature f : kAllFeatures)
    if (to_string(f) == s) return f;
  return std::nullopt;
}

enum class Comparator { at_most, at_least, within_range };

inline std::string_view to_string(Comparator c) {
  switch (c) {
    case Comparator::at_most: return "at_most";
    case Comparator::at_least: return "at_least";
    case Comparator::within_range: return "within_range";
  }
  return "?";
}

inline std::optional<Comparator> parse_comparator(std::string_view s) {
  if (s == "at_most") return Comparator::at_most;
  if (s == "at_least") return Comparator::at_least;
  if (s == "within_range") return Comparator::within_range;
  return std::nullopt;
}

struct Range {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double v) const { return lo <= v && v <= hi; }
  bool operator==(const Range&) const = default;
};

// One declarative if-this-then-that constraint over a single feature.
// `threshold` is used by at_most/at_least, `range` by within_range.
struct OverlayRule {
  std::string id;
  Feature feature = Feature::brevity;
  Comparator comparator = Comparator::at_most;
  double threshold = 0.0;
  Range range;
  double rigidity = 0.5;         // epsilon in [0,1]
  double urgent_threshold = 0.8; // in (0,1]
  std::string descriptor_template = "{feature} is {value}, expected {threshold}";
  int priority = 1;

  bool operator==(const OverlayRule&) const = default;
};

}  // namespace gobs
