#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "gobs/core/error.hpp"
#include "gobs/extract/embedding.hpp"

namespace gobs {

// For each token, a softmax (temperature 1) over its cosine similarity to every
// token of the response; returns the mean Shannon entropy in nats.
inline double token_entropy(std::span<const EmbeddingVector> vectors) {
  if (vectors.empty()) throw PreconditionError("token_entropy: empty token list");
  const std::size_t n = vectors.size();
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) norms[i] = std::sqrt(dot(vectors[i], vectors[i]));

  std::vector<double> sims(n);
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double max_sim = -INFINITY;
    for (std::size_t j = 0; j < n; ++j) {
      double denom = norms[t] * norms[j];
      sims[j] = denom > 0.0 ? dot(vectors[t], vectors[j]) / denom : 0.0;
      max_sim = std::max(max_sim, sims[j]);
    }
    double z = 0.0;
    for (auto& s : sims) {
      s = std::exp(s - max_sim);
      z += s;
    }
    double h = 0.0;
    for (double e : sims) {
      double p = e / z;
      if (p > 0.0) h -= p * std::log(p);
    }
    total += h;
  }
  return std::max(0.0, total / static_cast<double>(n));
}

// |token_entropy(current) - prev_entropy|
inline double coherence_gain(double prev_entropy, std::span<const EmbeddingVector> current) {
  if (current.empty()) throw PreconditionError("coherence_gain: empty current response");
  if (!(prev_entropy >= 0.0)) throw PreconditionError("coherence_gain: negative previous entropy");
  return std::abs(token_entropy(current) - prev_entropy);
}

}  // namespace gobs
