#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "gobs/core/error.hpp"

namespace gobs {

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t dimension() const noexcept { return values.size(); }
  bool operator==(const EmbeddingVector&) const = default;
};

inline double dot(const EmbeddingVector& a, const EmbeddingVector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += a.values[i] * b.values[i];
  return s;
}

// Cosine similarity; 0 when either vector has zero norm.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dimension() != b.dimension()) throw PreconditionError("cosine: dimension mismatch");
  double na = std::sqrt(dot(a, a));
  double nb = std::sqrt(dot(b, b));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot(a, b) / (na * nb);
}

// Maps tokens to fixed-dimension vectors. Implementations must be
// deterministic and reentrant; embed returns one vector per token.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> tokens) const = 0;
};

namespace detail {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace detail

// Token -> pseudo-random unit vector seeded from a hash of the token.
// Identical tokens map to identical vectors; output is platform independent.
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dimension = 64,
                                 std::uint64_t seed = 0x9e3779b97f4a7c15ULL)
      : dimension_(dimension), seed_(seed) {
    if (dimension_ == 0) throw PreconditionError("embedding dimension must be > 0");
  }

  std::size_t dimension() const override { return dimension_; }

  EmbeddingVector embed_one(std::string_view token) const {
    std::uint64_t state = detail::fnv1a64(token) ^ seed_;
    EmbeddingVector v;
    v.values.resize(dimension_);
    double norm2 = 0.0;
    for (auto& x : v.values) {
      // uniform in [-1, 1) from the top 53 bits
      x = static_cast<double>(detail::splitmix64(state) >> 11) * 0x1.0p-52 - 1.0;
      norm2 += x * x;
    }
    double n = std::sqrt(norm2);
    if (n > 0.0)
      for (auto& x : v.values) x /= n;
    return v;
  }

  std::vector<EmbeddingVector> embed(std::span<const std::string> tokens) const override {
    std::vector<EmbeddingVector> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(embed_one(t));
    return out;
  }

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

}  // namespace gobs
