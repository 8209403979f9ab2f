#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "gobs/core/config.hpp"
#include "gobs/extract/assistance.hpp"
#include "gobs/extract/coherence.hpp"
#include "gobs/extract/embedding.hpp"
#include "gobs/extract/lexicon.hpp"
#include "gobs/extract/segment.hpp"
#include "gobs/extract/specificity.hpp"
#include "gobs/extract/tone.hpp"

namespace gobs {

// Counts completion tokens; plug in a vendor tokenizer to match its accounting.
using Tokenizer = std::function<std::size_t(std::string_view)>;

inline std::size_t count_completion_tokens(std::string_view text, const Tokenizer& tokenizer = {}) {
  if (tokenizer) return tokenizer(text);
  return tokenize(text).size();
}

struct FeatureVector {
  std::size_t brevity_tokens = 0;
  ToneScore tone;
  double specificity = 0.0;
  double coherence_gain = 0.0;
  double assistance_similarity = 0.0;
  double response_entropy = 0.0;  // entropy of this response, reused as the next turn's reference

  bool operator==(const FeatureVector&) const = default;
};

inline double feature_value(const FeatureVector& f, Feature which) {
  switch (which) {
    case Feature::brevity: return static_cast<double>(f.brevity_tokens);
    case Feature::tone: return f.tone.combined;
    case Feature::specificity: return f.specificity;
    case Feature::coherence: return f.coherence_gain;
    case Feature::assistance: return f.assistance_similarity;
  }
  throw Error("unknown feature tag");
}

// Resources shared by the extractors. Cheap to copy; everything is immutable.
struct Extractors {
  std::shared_ptr<const SentimentLexicon> lexicon;
  std::shared_ptr<const WordList> descriptive;
  std::shared_ptr<const EmbeddingProvider> embeddings;
  EntityMatcher entity_matcher;  // empty: capitalized-run heuristic
  Tokenizer tokenizer;           // empty: segment() token count

  // Lexica from the config paths (built-ins when empty) and the local hash
  // embedding provider.
  static Extractors local(const EngineConfig& config) {
    Extractors x;
    x.lexicon = config.lexicon_path.empty()
                    ? std::make_shared<SentimentLexicon>(SentimentLexicon::builtin())
                    : std::make_shared<SentimentLexicon>(SentimentLexicon::load(config.lexicon_path));
    x.descriptive = config.descriptive_lexicon_path.empty()
                        ? std::make_shared<WordList>(WordList::builtin_descriptive())
                        : std::make_shared<WordList>(WordList::load(config.descriptive_lexicon_path));
    x.embeddings = std::make_shared<HashEmbeddingProvider>(
        static_cast<std::size_t>(config.embedding.dimension), config.embedding.seed);
    return x;
  }
};

inline double response_entropy(std::string_view text, const EmbeddingProvider& provider) {
  auto tokens = tokenize(text);
  if (tokens.empty()) return 0.0;
  return token_entropy(provider.embed(tokens));
}

// Scores a candidate response. `reference` is the earlier turn coherence is
// measured against (none for the first agent turn).
inline FeatureVector extract_all(std::string_view response,
                                 const std::optional<std::string>& reference,
                                 const EngineConfig& config, const Extractors& x) {
  FeatureVector f;
  auto tokens = tokenize(response);
  f.brevity_tokens = x.tokenizer ? x.tokenizer(response) : tokens.size();
  f.tone = combined_tone(response, *x.lexicon, config.tone_weights);
  f.specificity =
      specificity(response, x.entity_matcher, *x.descriptive, config.specificity_max_counts);

  double prev = reference ? response_entropy(*reference, *x.embeddings) : 0.0;
  if (tokens.empty()) {
    f.response_entropy = 0.0;
    f.coherence_gain = std::abs(0.0 - prev);
    f.assistance_similarity = 0.0;
    return f;
  }
  auto vectors = x.embeddings->embed(tokens);
  f.response_entropy = token_entropy(vectors);
  f.coherence_gain = std::abs(f.response_entropy - prev);
  f.assistance_similarity =
      assistance_similarity(response, config.assistance_keywords, *x.embeddings);
  return f;
}

inline json to_json(const FeatureVector& f) {
  return json{{"brevity_tokens", f.brevity_tokens},
              {"tone",
               {{"C", f.tone.combined},
                {"H", f.tone.holistic},
                {"sentence_scores", f.tone.sentence_scores},
                {"n", f.tone.sentence_count}}},
              {"specificity", f.specificity},
              {"coherence_gain", f.coherence_gain},
              {"assistance_similarity", f.assistance_similarity},
              {"response_entropy", f.response_entropy}};
}

inline FeatureVector feature_vector_from_json(const json& j) {
  FeatureVector f;
  f.brevity_tokens = j.at("brevity_tokens").get<std::size_t>();
  const auto& t = j.at("tone");
  f.tone.combined = t.at("C").get<double>();
  f.tone.holistic = t.at("H").get<double>();
  f.tone.sentence_scores = t.at("sentence_scores").get<std::vector<double>>();
  f.tone.sentence_count = t.at("n").get<std::size_t>();
  f.specificity = j.at("specificity").get<double>();
  f.coherence_gain = j.at("coherence_gain").get<double>();
  f.assistance_similarity = j.at("assistance_similarity").get<double>();
  f.response_entropy = j.at("response_entropy").get<double>();
  return f;
}

}  // namespace gobs
