#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gobs/client/chat.hpp"
#include "gobs/observer/directive.hpp"

namespace gobs {

struct RewriteResult {
  FeedbackDirective directive;
  std::optional<std::string> warning;
};

inline constexpr std::string_view kRewriteInstruction =
    "Rewrite the following feedback for a conversational agent in your own words. Keep every "
    "instruction and topic it mentions. Reply with the rewritten feedback only.";

namespace detail {

inline bool contains_ci(const std::string& haystack, const std::string& needle) {
  return lowercase(haystack).find(lowercase(needle)) != std::string::npos;
}

}  // namespace detail

// True when `text` still mentions every source rule's topic (any one of its
// clause keywords, case-insensitive).
inline bool preserves_rule_mentions(const FeedbackDirective& original, const std::string& text,
                                    const ClauseTable& clauses) {
  for (Feature f : original.source_features) {
    const auto& kws = clauses.at(f).keywords;
    if (kws.empty()) continue;
    bool found = false;
    for (const auto& k : kws) found = found || detail::contains_ci(text, k);
    if (!found) return false;
  }
  return true;
}

// Paraphrases a directive through the observer model. Fails open: on any
// transport error or lost rule mention the template directive is returned
// unchanged with a warning.
inline RewriteResult rewrite_with_model(const FeedbackDirective& directive, ChatClient& client,
                                        const ClauseTable& clauses = ClauseTable::builtin(),
                                        const ChatParams& params = {0.2, 256}) {
  std::vector<ChatMessage> messages{{Role::system, std::string(kRewriteInstruction)},
                                    {Role::user, directive.text}};
  std::string text;
  try {
    text = client.complete(messages, params);
  } catch (const std::exception& e) {
    return {directive, std::string("observer rewrite failed, kept template directive: ") + e.what()};
  }
  auto trimmed = std::string(detail::trim(text));
  if (trimmed.empty())
    return {directive, std::string("observer rewrite returned empty text, kept template directive")};
  if (!preserves_rule_mentions(directive, trimmed, clauses))
    return {directive, std::string("observer rewrite dropped a rule mention, kept template directive")};
  FeedbackDirective out = directive;
  out.text = std::move(trimmed);
  return {std::move(out), std::nullopt};
}

}  // namespace gobs
