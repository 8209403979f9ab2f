#pragma once

#include <string_view>
#include <vector>

#include "gobs/core/config.hpp"
#include "gobs/extract/lexicon.hpp"
#include "gobs/extract/segment.hpp"

namespace gobs {

struct ToneScore {
  double combined = 0.0;                // C
  double holistic = 0.0;                // H
  std::vector<double> sentence_scores;  // s_i
  std::size_t sentence_count = 1;       // n
  bool operator==(const ToneScore&) const = default;
};

// C = H * w_H + (1/n) * sum_i s_i * w_i
inline double combine_tone(double holistic, const std::vector<double>& sentence_scores,
                           const ToneWeights& weights) {
  double acc = 0.0;
  for (std::size_t i = 0; i < sentence_scores.size(); ++i)
    acc += sentence_scores[i] * weights.weight_for(i);
  double n = sentence_scores.empty() ? 1.0 : static_cast<double>(sentence_scores.size());
  return holistic * weights.holistic + acc / n;
}

// Text without sentences scores as a single neutral sentence.
inline ToneScore combined_tone(std::string_view text, const SentimentLexicon& lexicon,
                               const ToneWeights& weights) {
  ToneScore t;
  t.holistic = sentiment_score(text, lexicon);
  for (const auto& s : split_sentences(text)) t.sentence_scores.push_back(sentiment_score(s, lexicon));
  if (t.sentence_scores.empty()) t.sentence_scores.push_back(0.0);
  t.sentence_count = t.sentence_scores.size();
  t.combined = combine_tone(t.holistic, t.sentence_scores, weights);
  return t;
}

}  // namespace gobs
