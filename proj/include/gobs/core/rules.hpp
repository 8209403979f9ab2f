#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "gobs/core/config.hpp"
#include "gobs/core/types.hpp"

namespace gobs {

// A rule list that passed validate_rules: ids unique, sorted by priority.
class RuleSet {
 public:
  RuleSet() = default;

  const std::vector<OverlayRule>& rules() const noexcept { return rules_; }
  bool empty() const noexcept { return rules_.empty(); }
  std::size_t size() const noexcept { return rules_.size(); }
  auto begin() const { return rules_.begin(); }
  auto end() const { return rules_.end(); }

  const OverlayRule* find(const std::string& id) const {
    for (const auto& r : rules_)
      if (r.id == id) return &r;
    return nullptr;
  }

  bool operator==(const RuleSet&) const = default;

 private:
  friend RuleSet validate_rules(std::vector<OverlayRule> rules);
  explicit RuleSet(std::vector<OverlayRule> r) : rules_(std::move(r)) {}
  std::vector<OverlayRule> rules_;
};

inline void validate_rule(const OverlayRule& r) {
  if (r.id.empty()) throw RuleError("", "empty rule id");
  if (!(r.rigidity >= 0.0 && r.rigidity <= 1.0)) throw RuleError(r.id, "rigidity must be in [0, 1]");
  if (!(r.urgent_threshold > 0.0 && r.urgent_threshold <= 1.0))
    throw RuleError(r.id, "urgent_threshold must be in (0, 1]");
  if (r.comparator == Comparator::within_range) {
    if (!(std::isfinite(r.range.lo) && std::isfinite(r.range.hi) && r.range.lo <= r.range.hi))
      throw RuleError(r.id, "within_range requires lo <= hi");
  } else if (!std::isfinite(r.threshold)) {
    throw RuleError(r.id, "threshold must be finite");
  }
  for (const char* ph : {"{feature}", "{value}", "{threshold}"})
    if (r.descriptor_template.find(ph) == std::string::npos)
      throw RuleError(r.id, std::string("descriptor_template is missing placeholder ") + ph);
  if (r.priority < 1) throw RuleError(r.id, "priority must be a positive integer");
}

// Rejects duplicate ids and invalid rules; returns rules stably sorted by priority.
inline RuleSet validate_rules(std::vector<OverlayRule> rules) {
  std::set<std::string> ids;
  for (const auto& r : rules) {
    validate_rule(r);
    if (!ids.insert(r.id).second) throw RuleError(r.id, "duplicate rule id");
  }
  std::stable_sort(rules.begin(), rules.end(),
                   [](const OverlayRule& a, const OverlayRule& b) { return a.priority < b.priority; });
  return RuleSet(std::move(rules));
}

inline json rule_to_json(const OverlayRule& r) {
  json j = {{"id", r.id},
            {"feature", to_string(r.feature)},
            {"comparator", to_string(r.comparator)},
            {"rigidity", r.rigidity},
            {"urgent_threshold", r.urgent_threshold},
            {"descriptor_template", r.descriptor_template},
            {"priority", r.priority}};
  if (r.comparator == Comparator::within_range)
    j["threshold"] = {r.range.lo, r.range.hi};
  else
    j["threshold"] = r.threshold;
  return j;
}

inline json rules_to_json(const RuleSet& rules) {
  json arr = json::array();
  for (const auto& r : rules) arr.push_back(rule_to_json(r));
  return json{{"rules", arr}};
}

inline OverlayRule rule_from_json(const json& j) {
  if (!j.is_object()) throw RuleError("", "rule record must be an object");
  OverlayRule r;
  std::string hint = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "";
  auto fail = [&](const std::string& what) -> RuleError { return RuleError(hint, what); };
  static const std::set<std::string> known = {"id",       "feature",          "comparator",
                                              "threshold", "rigidity",        "urgent_threshold",
                                              "descriptor_template", "priority"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw fail("unknown key '" + it.key() + "'");
  for (const char* k : {"id", "feature", "comparator", "threshold", "rigidity"})
    if (!j.contains(k)) throw fail(std::string("missing key '") + k + "'");

  if (!j["id"].is_string()) throw fail("id must be a string");
  r.id = j["id"].get<std::string>();
  if (!j["feature"].is_string()) throw fail("feature must be a string");
  auto f = parse_feature(j["feature"].get<std::string>());
  if (!f) throw fail("unknown feature '" + j["feature"].get<std::string>() + "'");
  r.feature = *f;
  if (!j["comparator"].is_string()) throw fail("comparator must be a string");
  auto c = parse_comparator(j["comparator"].get<std::string>());
  if (!c) throw fail("unknown comparator '" + j["comparator"].get<std::string>() + "'");
  r.comparator = *c;

  const json& th = j["threshold"];
  if (r.comparator == Comparator::within_range) {
    if (!th.is_array() || th.size() != 2 || !th[0].is_number() || !th[1].is_number())
      throw fail("within_range threshold must be [lo, hi]");
    r.range = Range{th[0].get<double>(), th[1].get<double>()};
  } else {
    if (!th.is_number()) throw fail("threshold must be a number");
    r.threshold = th.get<double>();
  }
  if (!j["rigidity"].is_number()) throw fail("rigidity must be a number");
  r.rigidity = j["rigidity"].get<double>();
  if (j.contains("urgent_threshold")) {
    if (!j["urgent_threshold"].is_number()) throw fail("urgent_threshold must be a number");
    r.urgent_threshold = j["urgent_threshold"].get<double>();
  }
  if (j.contains("descriptor_template")) {
    if (!j["descriptor_template"].is_string()) throw fail("descriptor_template must be a string");
    r.descriptor_template = j["descriptor_template"].get<std::string>();
  }
  if (j.contains("priority")) {
    if (!j["priority"].is_number_integer()) throw fail("priority must be an integer");
    r.priority = j["priority"].get<int>();
  }
  return r;
}

// Rule file: {"rules": [ {...}, ... ]} or a bare array of rule records.
inline RuleSet load_rules(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw RuleError("", std::string("rule file parse failure: ") + e.what());
  }
  const json* list = &doc;
  if (doc.is_object()) {
    for (auto it = doc.begin(); it != doc.end(); ++it)
      if (it.key() != "rules") throw RuleError("", "unknown key '" + it.key() + "'");
    if (!doc.contains("rules")) throw RuleError("", "missing key 'rules'");
    list = &doc["rules"];
  }
  if (!list->is_array()) throw RuleError("", "rules must be an array");
  std::vector<OverlayRule> rules;
  for (const auto& r : *list) rules.push_back(rule_from_json(r));
  return validate_rules(std::move(rules));
}

// Rule set implied by the config's feature thresholds, used when no rule file is given.
inline RuleSet default_rules(const EngineConfig& c) {
  std::vector<OverlayRule> rules;
  rules.push_back({"brevity", Feature::brevity, Comparator::at_most,
                   static_cast<double>(c.brevity_limit_tokens), {}, 1.0, 0.5,
                   "response length {feature} is {value} tokens, limit {threshold}", 1});
  rules.push_back({"tone", Feature::tone, Comparator::within_range, 0.0, c.tone_acceptable_range,
                   0.5, 0.8, "{feature} score is {value}, acceptable band {threshold}", 2});
  rules.push_back({"coherence", Feature::coherence, Comparator::at_most, c.coherence_threshold, {},
                   0.5, 0.9, "{feature} gain is {value}, expected at most {threshold}", 2});
  rules.push_back({"specificity", Feature::specificity, Comparator::at_most, c.specificity_limit, {},
                   0.3, 0.9, "{feature} is {value}, expected at most {threshold}", 3});
  rules.push_back({"assistance", Feature::assistance, Comparator::at_most, c.assistance_threshold,
                   {}, 0.5, 0.9, "{feature} similarity is {value}, expected at most {threshold}", 4});
  return validate_rules(std::move(rules));
}

}  // namespace gobs
