#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gobs/extract/features.hpp"
#include "gobs/gate/decision.hpp"
#include "gobs/observer/directive.hpp"
#include "gobs/overlay/descriptor.hpp"

namespace gobs {

struct CandidateAction {
  std::string text;
  int attempt = 0;
  FeatureVector features;
  std::vector<Descriptor> descriptors;
  std::int64_t wall_time_ms = 0;

  bool operator==(const CandidateAction&) const = default;
};

// Full trace of one agent turn: every candidate, the gate's decision on
// each, and the directives that flowed into and out of the turn.
struct EvaluationRecord {
  std::string session_id;
  std::size_t turn = 0;  // index of the agent turn in the conversation
  std::vector<CandidateAction> candidates;
  std::vector<GateDecision> decisions;
  std::size_t accepted_index = 0;
  std::string accepted_text;
  std::optional<FeedbackDirective> injected_implicit;  // carried in from the previous turn
  std::optional<FeedbackDirective> pending_implicit;   // carried into the next turn
  int forced_count = 0;
  std::vector<std::string> warnings;
  std::uint64_t rng_counter = 0;  // draws consumed by the session after this turn

  bool budget_exhausted() const { return !decisions.empty() && decisions.back().budget_exhausted; }
  bool operator==(const EvaluationRecord&) const = default;
};

inline json to_json(const CandidateAction& c) {
  json ds = json::array();
  for (const auto& d : c.descriptors) ds.push_back(to_json(d));
  return json{{"text", c.text},
              {"attempt", c.attempt},
              {"features", to_json(c.features)},
              {"descriptors", ds},
              {"wall_time_ms", c.wall_time_ms}};
}

inline json to_json(const EvaluationRecord& r) {
  json cands = json::array();
  for (const auto& c : r.candidates) cands.push_back(to_json(c));
  json decs = json::array();
  for (const auto& d : r.decisions) decs.push_back(to_json(d));
  return json{{"session_id", r.session_id},
              {"turn", r.turn},
              {"candidates", cands},
              {"decisions", decs},
              {"accepted_index", r.accepted_index},
              {"accepted_text", r.accepted_text},
              {"injected_implicit", to_json(r.injected_implicit)},
              {"pending_implicit", to_json(r.pending_implicit)},
              {"forced_count", r.forced_count},
              {"warnings", r.warnings},
              {"rng_counter", r.rng_counter}};
}

inline EvaluationRecord record_from_json(const json& j) {
  EvaluationRecord r;
  r.session_id = j.at("session_id").get<std::string>();
  r.turn = j.at("turn").get<std::size_t>();
  for (const auto& c : j.at("candidates")) {
    CandidateAction a;
    a.text = c.at("text").get<std::string>();
    a.attempt = c.at("attempt").get<int>();
    a.features = feature_vector_from_json(c.at("features"));
    for (const auto& d : c.at("descriptors")) a.descriptors.push_back(descriptor_from_json(d));
    a.wall_time_ms = c.at("wall_time_ms").get<std::int64_t>();
    r.candidates.push_back(std::move(a));
  }
  for (const auto& d : j.at("decisions")) r.decisions.push_back(decision_from_json(d));
  r.accepted_index = j.at("accepted_index").get<std::size_t>();
  r.accepted_text = j.at("accepted_text").get<std::string>();
  r.injected_implicit = optional_directive_from_json(j.at("injected_implicit"));
  r.pending_implicit = optional_directive_from_json(j.at("pending_implicit"));
  r.forced_count = j.at("forced_count").get<int>();
  r.warnings = j.at("warnings").get<std::vector<std::string>>();
  r.rng_counter = j.at("rng_counter").get<std::uint64_t>();
  return r;
}

inline json to_json(const Turn& t) {
  return json{{"speaker", to_string(t.speaker)},
              {"text", t.text},
              {"index", t.index},
              {"timestamp_ms", t.timestamp_ms ? json(*t.timestamp_ms) : json(nullptr)},
              {"placeholder", t.placeholder}};
}

inline Turn turn_from_json(const json& j) {
  Turn t;
  t.speaker = parse_speaker(j.at("speaker").get<std::string>());
  t.text = j.at("text").get<std::string>();
  t.index = j.at("index").get<std::size_t>();
  if (!j.at("timestamp_ms").is_null()) t.timestamp_ms = j.at("timestamp_ms").get<std::int64_t>();
  t.placeholder = j.value("placeholder", false);
  return t;
}

}  // namespace gobs
