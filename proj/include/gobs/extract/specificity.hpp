#pragma once

#include <algorithm>
#include <functional>
#include <string_view>

#include "gobs/core/config.hpp"
#include "gobs/extract/lexicon.hpp"
#include "gobs/extract/segment.hpp"

namespace gobs {

// Counts named entities in a text.
using EntityMatcher = std::function<std::size_t(std::string_view)>;

namespace detail {

inline bool starts_upper(std::string_view w) {
  if (w.empty()) return false;
  std::size_t i = 0;
  char32_t cp = next_code_point(w, i);
  return to_lower(cp) != cp;
}

inline bool is_first_person(std::string_view w) {
  return w == "I" || (w.size() > 2 && w[0] == 'I' && w[1] == '\'');
}

}  // namespace detail

// Runs of consecutive capitalized words that do not start a sentence.
// "I" and its contractions never count.
inline std::size_t capitalized_run_entities(std::string_view text) {
  std::size_t count = 0;
  for (const auto& sentence : split_sentences(text)) {
    auto ws = words(sentence);
    bool in_run = false;
    for (std::size_t i = 0; i < ws.size(); ++i) {
      bool cap = i > 0 && detail::starts_upper(ws[i]) && !detail::is_first_person(ws[i]);
      if (cap && !in_run) ++count;
      in_run = cap;
    }
  }
  return count;
}

struct SpecificityCounts {
  std::size_t entities = 0;
  std::size_t descriptive = 0;
};

inline SpecificityCounts specificity_counts(std::string_view text, const EntityMatcher& entities,
                                            const WordList& descriptive) {
  SpecificityCounts c;
  c.entities = entities ? entities(text) : capitalized_run_entities(text);
  for (const auto& tok : tokenize(text))
    if (descriptive.contains(tok)) ++c.descriptive;
  return c;
}

// 0.5 * min(1, entities / max_entities) + 0.5 * min(1, descriptive / max_descriptive)
inline double specificity_score(const SpecificityCounts& c, const SpecificityLimits& limits) {
  double e = std::min(1.0, static_cast<double>(c.entities) / limits.max_entities);
  double d = std::min(1.0, static_cast<double>(c.descriptive) / limits.max_descriptive);
  return 0.5 * e + 0.5 * d;
}

inline double specificity(std::string_view text, const EntityMatcher& entities,
                          const WordList& descriptive, const SpecificityLimits& limits) {
  return specificity_score(specificity_counts(text, entities, descriptive), limits);
}

}  // namespace gobs
