#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "gobs/core/error.hpp"
#include "gobs/extract/embedding.hpp"
#include "gobs/extract/segment.hpp"

namespace gobs {

// Largest non-negative cosine similarity between any response token and any
// assistance keyword. A literal keyword in the text scores exactly 1.
inline double assistance_similarity(std::string_view text, const std::vector<std::string>& keywords,
                                    const EmbeddingProvider& provider) {
  if (keywords.empty()) throw PreconditionError("assistance_similarity: empty keyword list");
  auto tokens = tokenize(text);
  if (tokens.empty()) return 0.0;
  std::vector<std::string> keys;
  keys.reserve(keywords.size());
  for (const auto& k : keywords) keys.push_back(lowercase(k));
  for (const auto& t : tokens)
    if (std::find(keys.begin(), keys.end(), t) != keys.end()) return 1.0;

  auto tv = provider.embed(tokens);
  auto kv = provider.embed(keys);
  double best = 0.0;
  for (const auto& a : tv)
    for (const auto& b : kv) best = std::max(best, cosine(a, b));
  return std::clamp(best, 0.0, 1.0);
}

}  // namespace gobs
