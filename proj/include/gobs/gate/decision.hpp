#pragma once

#include <functional>
#include <optional>
#include <ranges>
#include <string>
#include <vector>

#include "gobs/core/config.hpp"
#include "gobs/core/rules.hpp"
#include "gobs/gate/rng.hpp"
#include "gobs/observer/directive.hpp"
#include "gobs/overlay/descriptor.hpp"

namespace gobs {

enum class DecisionKind { accept, accept_with_implicit, reject };

inline std::string_view to_string(DecisionKind k) {
  switch (k) {
    case DecisionKind::accept: return "accept";
    case DecisionKind::accept_with_implicit: return "accept_with_implicit";
    case DecisionKind::reject: return "reject";
  }
  return "?";
}

struct GateDecision {
  DecisionKind kind = DecisionKind::accept;
  std::optional<FeedbackDirective> directive;
  int attempt = 0;
  bool budget_exhausted = false;

  bool operator==(const GateDecision&) const = default;
};

// True when a rule counts as highly rigid and the deviation leaves its
// permissible band (deviation > 1 - epsilon).
inline bool rigid_violation(const OverlayRule& rule, const Descriptor& d, const EngineConfig& config) {
  return rule.rigidity >= config.rigid_cutoff && d.deviation > 1.0 - rule.rigidity;
}

// The buffer. Consumes exactly one rng draw whenever descriptors are present.
//  - no descriptors: accept
//  - a rigid violation: reject with forced feedback, or at the last attempt
//    accept with budget_exhausted set (the caller picks the best candidate)
//  - soft violations only: if an urgent descriptor exists and the draw falls
//    under forced_feedback_probability, reject; otherwise accept with implicit
//    feedback for the next turn. Never rejects at the last attempt.
inline GateDecision decide(const std::vector<Descriptor>& descriptors, const RuleSet& rules, int attempt,
                           RngState& rng, const EngineConfig& config,
                           const ClauseTable& clauses = ClauseTable::builtin(),
                           const std::optional<std::string>& exemplar = std::nullopt) {
  if (attempt < 0 || attempt > config.max_regenerations)
    throw PreconditionError("decide: attempt " + std::to_string(attempt) + " outside budget of " +
                            std::to_string(config.max_regenerations));
  GateDecision out;
  out.attempt = attempt;
  if (descriptors.empty()) return out;

  const double draw = rng.uniform();
  const bool last_attempt = attempt == config.max_regenerations;

  bool rigid = false;
  bool urgent = false;
  for (const auto& d : descriptors) {
    const OverlayRule* rule = rules.find(d.rule_id);
    if (!rule) throw PreconditionError("decide: descriptor for unknown rule '" + d.rule_id + "'");
    rigid = rigid || rigid_violation(*rule, d, config);
    urgent = urgent || d.urgent;
  }

  if (rigid) {
    if (last_attempt) {
      out.kind = DecisionKind::accept;
      out.budget_exhausted = true;
    } else {
      out.kind = DecisionKind::reject;
      out.directive = synthesize_forced(descriptors, exemplar, clauses);
    }
    return out;
  }

  if (urgent && draw < config.forced_feedback_probability && !last_attempt) {
    out.kind = DecisionKind::reject;
    out.directive = synthesize_forced(descriptors, exemplar, clauses);
    return out;
  }
  out.kind = DecisionKind::accept_with_implicit;
  out.directive = synthesize_implicit(descriptors, clauses);
  return out;
}

// Index of the candidate minimizing (urgent descriptor count, deviation sum,
// index). `descriptors_of` projects a candidate to its descriptor list.
template <std::ranges::forward_range R, typename Proj = std::identity>
std::size_t rank_candidates(const R& candidates, Proj descriptors_of = {}) {
  std::size_t best = 0;
  std::size_t best_urgent = 0;
  double best_sum = 0.0;
  std::size_t index = 0;
  for (const auto& c : candidates) {
    const std::vector<Descriptor>& ds = std::invoke(descriptors_of, c);
    std::size_t urgent = 0;
    double sum = 0.0;
    for (const auto& d : ds) {
      urgent += d.urgent ? 1 : 0;
      sum += d.deviation;
    }
    if (index == 0 || urgent < best_urgent || (urgent == best_urgent && sum < best_sum)) {
      best = index;
      best_urgent = urgent;
      best_sum = sum;
    }
    ++index;
  }
  if (index == 0) throw PreconditionError("rank_candidates: no candidates");
  return best;
}

inline json to_json(const GateDecision& d) {
  return json{{"kind", to_string(d.kind)},
              {"directive", to_json(d.directive)},
              {"attempt", d.attempt},
              {"budget_exhausted", d.budget_exhausted}};
}

inline GateDecision decision_from_json(const json& j) {
  GateDecision d;
  auto k = j.at("kind").get<std::string>();
  d.kind = k == "accept" ? DecisionKind::accept
           : k == "reject" ? DecisionKind::reject
                           : DecisionKind::accept_with_implicit;
  d.directive = optional_directive_from_json(j.at("directive"));
  d.attempt = j.at("attempt").get<int>();
  d.budget_exhausted = j.at("budget_exhausted").get<bool>();
  return d;
}

}  // namespace gobs
