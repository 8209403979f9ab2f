#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "gobs/core/config.hpp"
#include "gobs/core/types.hpp"
#include "gobs/extract/lexicon.hpp"
#include "gobs/overlay/descriptor.hpp"

namespace gobs {

enum class DirectiveKind { implicit, forced };

inline std::string_view to_string(DirectiveKind k) {
  return k == DirectiveKind::implicit ? "implicit" : "forced";
}

struct FeedbackDirective {
  DirectiveKind kind = DirectiveKind::implicit;
  std::string text;
  std::vector<std::string> source_rule_ids;
  std::vector<Feature> source_features;  // parallel to source_rule_ids
  bool includes_example = false;

  bool operator==(const FeedbackDirective&) const = default;
};

// Built-in copy of data/clauses.json.
inline constexpr std::string_view kDefaultClausesJson = R"clauses(
{
  "brevity": {
    "implicit": "Your last reply ran long; aim for a more concise reply that still addresses the topic.",
    "forced": "Your response is too long; provide a concise reply of one or two short sentences.",
    "keywords": ["concise", "brief", "short", "long", "length"]
  },
  "tone": {
    "implicit": "Consider a warmer, gentler tone in your replies.",
    "forced": "Your response sounds negative; provide a friendly and positive reply.",
    "keywords": ["tone", "positive", "friendly", "warm", "gentle", "negative"]
  },
  "specificity": {
    "implicit": "Keep details light; casual small talk rarely needs names or elaborate description.",
    "forced": "Your response is too specific; provide a casual reply without specific names or elaborate description.",
    "keywords": ["specific", "detail", "names", "elaborate", "casual"]
  },
  "coherence": {
    "implicit": "Try to stay closer to the current topic of the conversation.",
    "forced": "This reply drifts off-topic; provide a relevant reply that follows what was just said.",
    "keywords": ["topic", "relevant", "irrelevant", "conversation"]
  },
  "assistance": {
    "implicit": "Avoid sounding like a help desk; keep the exchange casual instead of offering assistance.",
    "forced": "Your response sounds like an assistant offering help; provide a casual reply without offering assistance or information.",
    "keywords": ["help", "assist", "assistance", "assistant", "information"]
  }
}
)clauses";

// Per-feature advice wording plus the topic keywords a paraphrase must keep.
struct Clause {
  std::string implicit_text;
  std::string forced_text;
  std::vector<std::string> keywords;
  bool operator==(const Clause&) const = default;
};

class ClauseTable {
 public:
  ClauseTable() : ClauseTable(builtin()) {}

  const Clause& at(Feature f) const { return clauses_.at(f); }

  static ClauseTable parse(std::string_view document) {
    json doc;
    try {
      doc = json::parse(document);
    } catch (const json::parse_error& e) {
      throw DataError(0, std::string("clause file parse failure: ") + e.what());
    }
    if (!doc.is_object()) throw DataError(0, "clause file must be an object");
    ClauseTable t(Empty{});
    for (auto it = doc.begin(); it != doc.end(); ++it) {
      auto f = parse_feature(it.key());
      if (!f) throw DataError(0, "clause file: unknown feature '" + it.key() + "'");
      const json& c = it.value();
      if (!c.is_object() || !c.contains("implicit") || !c.contains("forced") ||
          !c["implicit"].is_string() || !c["forced"].is_string())
        throw DataError(0, "clause file: '" + it.key() + "' needs implicit and forced strings");
      Clause cl{c["implicit"].get<std::string>(), c["forced"].get<std::string>(), {}};
      if (c.contains("keywords")) cl.keywords = c["keywords"].get<std::vector<std::string>>();
      if (cl.implicit_text.empty() || cl.forced_text.empty())
        throw DataError(0, "clause file: empty clause for '" + it.key() + "'");
      t.clauses_[*f] = std::move(cl);
    }
    for (Feature f : kAllFeatures)
      if (!t.clauses_.count(f))
        throw DataError(0, "clause file: missing feature '" + std::string(to_string(f)) + "'");
    return t;
  }

  static ClauseTable load(const std::string& path) { return parse(detail::read_file(path)); }

  static const ClauseTable& builtin() {
    static const ClauseTable t = parse(kDefaultClausesJson);
    return t;
  }

  bool operator==(const ClauseTable&) const = default;

 private:
  struct Empty {};
  explicit ClauseTable(Empty) {}
  std::map<Feature, Clause> clauses_;
};

inline constexpr std::string_view kImplicitLead = "Feedback for your next replies: ";
inline constexpr std::string_view kForcedLead = "Your previous candidate was rejected; revise it. ";

// Advisory directive for subsequent turns; none when nothing was violated.
inline std::optional<FeedbackDirective> synthesize_implicit(const std::vector<Descriptor>& descriptors,
                                                            const ClauseTable& clauses = ClauseTable::builtin()) {
  if (descriptors.empty()) return std::nullopt;
  FeedbackDirective d;
  d.kind = DirectiveKind::implicit;
  d.text = kImplicitLead;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    if (i) d.text += ' ';
    d.text += clauses.at(descriptors[i].feature).implicit_text;
    d.source_rule_ids.push_back(descriptors[i].rule_id);
    d.source_features.push_back(descriptors[i].feature);
  }
  return d;
}

// Imperative directive naming every violated rule; urgent ones carry the
// "Urgent" keyword. The exemplar, when given, ends the text.
inline FeedbackDirective synthesize_forced(const std::vector<Descriptor>& descriptors,
                                           const std::optional<std::string>& exemplar,
                                           const ClauseTable& clauses = ClauseTable::builtin()) {
  if (descriptors.empty()) throw PreconditionError("synthesize_forced: no descriptors");
  FeedbackDirective d;
  d.kind = DirectiveKind::forced;
  d.text = kForcedLead;
  for (std::size_t i = 0; i < descriptors.size(); ++i) {
    const auto& desc = descriptors[i];
    if (i) d.text += ' ';
    if (desc.urgent) d.text += "Urgent: ";
    d.text += "Rule " + desc.rule_id + ": " + clauses.at(desc.feature).forced_text;
    d.source_rule_ids.push_back(desc.rule_id);
    d.source_features.push_back(desc.feature);
  }
  if (exemplar && !exemplar->empty()) {
    d.text += " For example, " + *exemplar;
    d.includes_example = true;
  }
  return d;
}

inline json to_json(const FeedbackDirective& d) {
  json features = json::array();
  for (Feature f : d.source_features) features.push_back(to_string(f));
  return json{{"kind", to_string(d.kind)},
              {"text", d.text},
              {"source_rule_ids", d.source_rule_ids},
              {"source_features", features},
              {"includes_example", d.includes_example}};
}

inline json to_json(const std::optional<FeedbackDirective>& d) {
  return d ? to_json(*d) : json(nullptr);
}

inline FeedbackDirective directive_from_json(const json& j) {
  FeedbackDirective d;
  d.kind = j.at("kind").get<std::string>() == "forced" ? DirectiveKind::forced : DirectiveKind::implicit;
  d.text = j.at("text").get<std::string>();
  d.source_rule_ids = j.at("source_rule_ids").get<std::vector<std::string>>();
  for (const auto& f : j.at("source_features")) {
    auto pf = parse_feature(f.get<std::string>());
    if (!pf) throw Error("unknown feature in directive");
    d.source_features.push_back(*pf);
  }
  d.includes_example = j.at("includes_example").get<bool>();
  return d;
}

inline std::optional<FeedbackDirective> optional_directive_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return directive_from_json(j);
}

}  // namespace gobs
