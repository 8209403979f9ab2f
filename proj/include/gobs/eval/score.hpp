#pragma once

#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gobs/core/config.hpp"
#include "gobs/core/types.hpp"
#include "gobs/eval/corpus.hpp"
#include "gobs/extract/features.hpp"

namespace gobs {

// Likert bins. Every function returns a score in 1..5 where 5 is the most
// small-talk-like value.

inline int brevity_score(std::size_t tokens, const LikertBins& bins) {
  for (std::size_t k = 0; k < bins.brevity_tokens.size(); ++k)
    if (static_cast<double>(tokens) <= bins.brevity_tokens[k]) return 5 - static_cast<int>(k);
  return 1;
}

inline int tone_score(double c, const LikertBins& bins) {
  for (std::size_t k = 0; k < bins.tone.size(); ++k)
    if (c < bins.tone[k]) return 1 + static_cast<int>(k);
  return 5;
}

inline int specificity_score_bin(double s, const LikertBins& bins) {
  for (std::size_t k = 0; k < bins.specificity.size(); ++k)
    if (s < bins.specificity[k]) return 5 - static_cast<int>(k);
  return 1;
}

inline int coherence_score(double gain, const LikertBins& bins) {
  for (std::size_t k = 0; k < bins.coherence_gain.size(); ++k)
    if (gain < bins.coherence_gain[k]) return 5 - static_cast<int>(k);
  return 1;
}

using CriterionScores = std::array<int, 4>;  // indexed like kAllCriteria

inline std::size_t criterion_index(Criterion c) { return static_cast<std::size_t>(c); }

inline CriterionScores likert_scores(const FeatureVector& f, const LikertBins& bins) {
  return {brevity_score(f.brevity_tokens, bins), tone_score(f.tone.combined, bins),
          specificity_score_bin(f.specificity, bins), coherence_score(f.coherence_gain, bins)};
}

struct TurnScore {
  std::size_t index = 0;
  Speaker speaker = Speaker::agent;
  FeatureVector features;
  CriterionScores scores{};
};

struct ConversationScores {
  std::string conversation_id;
  std::vector<TurnScore> turns;
};

// Reference turn for scoring turn `i`. With previous_agent the reference is
// the speaker's own previous turn; with previous_human it is the latest turn
// of the other speaker. Agent turns thus match the engine's choice.
inline std::optional<std::string> scoring_reference(const Conversation& conv, std::size_t i,
                                                    CoherenceReference which) {
  Speaker self = conv.turns[i].speaker;
  Speaker want = which == CoherenceReference::previous_agent
                     ? self
                     : (self == Speaker::agent ? Speaker::human : Speaker::agent);
  for (std::size_t k = i; k-- > 0;)
    if (conv.turns[k].speaker == want && !conv.turns[k].placeholder) return conv.turns[k].text;
  return std::nullopt;
}

// Scores every non-placeholder turn of both speakers.
inline ConversationScores auto_score(const Conversation& conv, const EngineConfig& config,
                                     const Extractors& extractors) {
  ConversationScores out;
  out.conversation_id = conv.id;
  for (std::size_t i = 0; i < conv.turns.size(); ++i) {
    const Turn& t = conv.turns[i];
    if (t.placeholder) continue;
    TurnScore s;
    s.index = t.index;
    s.speaker = t.speaker;
    s.features = extract_all(t.text, scoring_reference(conv, i, config.coherence_reference), config, extractors);
    s.scores = likert_scores(s.features, config.likert_bins);
    out.turns.push_back(std::move(s));
  }
  return out;
}

struct HumanLikenessScore {
  std::string conversation_id;
  Criterion criterion = Criterion::brevity;
  double value = 0.0;
  bool operator==(const HumanLikenessScore&) const = default;
};

inline double mean_score(const std::vector<double>& xs) {
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline HumanLikenessScore human_likeness(const std::string& conversation_id, Criterion criterion,
                                         const std::vector<double>& human, const std::vector<double>& agent) {
  if (human.empty() || agent.empty()) throw PreconditionError("human_likeness: empty score list");
  for (const auto* xs : {&human, &agent})
    for (double v : *xs)
      if (!(v >= 1.0 && v <= 5.0)) throw PreconditionError("human_likeness: score outside 1..5");
  return {conversation_id, criterion, std::abs(mean_score(human) - mean_score(agent))};
}

// Per-conversation mean score of each speaker on one criterion.
struct CriterionMeans {
  std::string conversation_id;
  Criterion criterion = Criterion::brevity;
  double human_mean = 0.0;
  double agent_mean = 0.0;
  std::size_t human_n = 0;
  std::size_t agent_n = 0;

  HumanLikenessScore likeness() const { return {conversation_id, criterion, std::abs(human_mean - agent_mean)}; }
};

namespace detail {

inline void push_means(std::vector<CriterionMeans>& out, const std::string& id, Criterion c,
                       const std::vector<double>& h, const std::vector<double>& a) {
  if (h.empty() || a.empty()) return;
  out.push_back({id, c, mean_score(h), mean_score(a), h.size(), a.size()});
}

}  // namespace detail

// Means from automatic scores. Conversations lacking either speaker are skipped.
inline std::vector<CriterionMeans> means_from_scores(const std::vector<ConversationScores>& all) {
  std::vector<CriterionMeans> out;
  for (Criterion c : kAllCriteria)
    for (const auto& cs : all) {
      std::vector<double> h, a;
      for (const auto& t : cs.turns)
        (t.speaker == Speaker::human ? h : a).push_back(t.scores[criterion_index(c)]);
      detail::push_means(out, cs.conversation_id, c, h, a);
    }
  return out;
}

// Means from rater annotations; a turn's score is averaged over its raters first.
inline std::vector<CriterionMeans> means_from_annotations(const Corpus& corpus) {
  std::vector<CriterionMeans> out;
  for (Criterion c : kAllCriteria)
    for (const auto& conv : corpus.conversations) {
      std::map<std::size_t, std::vector<double>> per_turn;
      for (const auto& a : corpus.annotations)
        if (a.conversation_id == conv.id && a.criterion == c) per_turn[a.turn].push_back(a.score);
      std::vector<double> h, a;
      for (const auto& [turn, scores] : per_turn) {
        if (turn >= conv.turns.size()) continue;
        (conv.turns[turn].speaker == Speaker::human ? h : a).push_back(mean_score(scores));
      }
      detail::push_means(out, conv.id, c, h, a);
    }
  return out;
}

// 5x5 agreement table between automatic scores and the rounded mean rater
// score, for one criterion. Rows: automatic score, columns: raters.
inline std::vector<std::vector<double>> agreement_table(const Corpus& corpus,
                                                        const std::vector<ConversationScores>& scores,
                                                        Criterion c) {
  std::vector<std::vector<double>> table(5, std::vector<double>(5, 0.0));
  std::map<std::pair<std::string, std::size_t>, std::vector<double>> rated;
  for (const auto& a : corpus.annotations)
    if (a.criterion == c) rated[{a.conversation_id, a.turn}].push_back(a.score);
  for (const auto& cs : scores)
    for (const auto& t : cs.turns) {
      auto it = rated.find({cs.conversation_id, t.index});
      if (it == rated.end()) continue;
      int human = static_cast<int>(std::lround(mean_score(it->second)));
      table[t.scores[criterion_index(c)] - 1][human - 1] += 1.0;
    }
  return table;
}

}  // namespace gobs
