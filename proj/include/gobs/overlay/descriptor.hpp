#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "gobs/core/rules.hpp"
#include "gobs/core/types.hpp"
#include "gobs/extract/features.hpp"

namespace gobs {

// How one candidate deviates from one overlay rule.
struct Descriptor {
  std::string rule_id;
  Feature feature = Feature::brevity;
  std::string text;
  double deviation = 0.0;  // [0, 1]
  bool urgent = false;
  int priority = 1;

  bool operator==(const Descriptor&) const = default;
};

inline constexpr double kDeviationScaleFloor = 1e-9;
inline constexpr std::string_view kUrgentPrefix = "urgent: ";

// Shortest decimal rendering with at most three fractional digits.
inline std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s.find('.') != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

inline bool rule_satisfied(const OverlayRule& rule, double v) {
  switch (rule.comparator) {
    case Comparator::at_most: return v <= rule.threshold;
    case Comparator::at_least: return v >= rule.threshold;
    case Comparator::within_range: return rule.range.contains(v);
  }
  return false;
}

// Linear overshoot past the nearest bound, normalized by |threshold| (range
// width for within_range) and capped at 1. Zero when the rule holds.
inline double rule_deviation(const OverlayRule& rule, double v) {
  if (rule_satisfied(rule, v)) return 0.0;
  double overshoot = 0.0;
  double scale = 0.0;
  switch (rule.comparator) {
    case Comparator::at_most:
      overshoot = v - rule.threshold;
      scale = std::abs(rule.threshold);
      break;
    case Comparator::at_least:
      overshoot = rule.threshold - v;
      scale = std::abs(rule.threshold);
      break;
    case Comparator::within_range:
      overshoot = v < rule.range.lo ? rule.range.lo - v : v - rule.range.hi;
      scale = rule.range.hi - rule.range.lo;
      break;
  }
  scale = std::max(scale, kDeviationScaleFloor);
  return std::min(1.0, overshoot / scale);
}

inline std::string render_descriptor(const OverlayRule& rule, double value, bool urgent) {
  std::string threshold =
      rule.comparator == Comparator::within_range
          ? "[" + format_number(rule.range.lo) + ", " + format_number(rule.range.hi) + "]"
          : format_number(rule.threshold);
  std::string out = rule.descriptor_template;
  auto replace_all = [&out](const std::string& key, const std::string& with) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos + with.size()))
      out.replace(pos, key.size(), with);
  };
  replace_all("{feature}", std::string(to_string(rule.feature)));
  replace_all("{value}", format_number(value));
  replace_all("{threshold}", threshold);
  if (out.empty()) out = std::string(to_string(rule.feature)) + " violated";
  return urgent ? std::string(kUrgentPrefix) + out : out;
}

inline std::optional<Descriptor> evaluate_rule(const OverlayRule& rule, const FeatureVector& features) {
  double v = feature_value(features, rule.feature);
  if (rule_satisfied(rule, v)) return std::nullopt;
  Descriptor d;
  d.rule_id = rule.id;
  d.feature = rule.feature;
  d.deviation = rule_deviation(rule, v);
  d.urgent = d.deviation >= rule.urgent_threshold;
  d.priority = rule.priority;
  d.text = render_descriptor(rule, v, d.urgent);
  return d;
}

// Strict weak order: urgent first, then larger deviation, lower priority
// number, rule id.
inline bool descriptor_before(const Descriptor& a, const Descriptor& b) {
  return std::make_tuple(!a.urgent, -a.deviation, a.priority, a.rule_id) <
         std::make_tuple(!b.urgent, -b.deviation, b.priority, b.rule_id);
}

inline std::vector<Descriptor> evaluate_all(const RuleSet& rules, const FeatureVector& features) {
  std::vector<Descriptor> out;
  for (const auto& r : rules)
    if (auto d = evaluate_rule(r, features)) out.push_back(std::move(*d));
  std::sort(out.begin(), out.end(), descriptor_before);
  return out;
}

inline json to_json(const Descriptor& d) {
  return json{{"rule_id", d.rule_id},         {"feature", to_string(d.feature)},
              {"text", d.text},               {"deviation", d.deviation},
              {"urgent", d.urgent},           {"priority", d.priority}};
}

inline Descriptor descriptor_from_json(const json& j) {
  Descriptor d;
  d.rule_id = j.at("rule_id").get<std::string>();
  auto f = parse_feature(j.at("feature").get<std::string>());
  if (!f) throw Error("unknown feature in descriptor");
  d.feature = *f;
  d.text = j.at("text").get<std::string>();
  d.deviation = j.at("deviation").get<double>();
  d.urgent = j.at("urgent").get<bool>();
  d.priority = j.at("priority").get<int>();
  return d;
}

}  // namespace gobs
