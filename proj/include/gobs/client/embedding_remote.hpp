#pragma once

#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gobs/client/http.hpp"
#include "gobs/extract/embedding.hpp"

namespace gobs {

struct RemoteEmbedding {
  std::vector<EmbeddingVector> vectors;
  std::optional<std::string> warning;  // set when the local fallback was used
};

// POST {model, input: [tokens]} -> {data: [{embedding: [...]}, ...]}.
// Transport failure falls back to `fallback` with a warning; a reply of the
// wrong dimension or count is an error.
inline RemoteEmbedding embed_remote(const JsonPoster& poster, std::size_t dimension,
                                    std::span<const std::string> tokens, const EmbeddingProvider& fallback) {
  if (tokens.empty()) throw PreconditionError("embed_remote: no tokens");
  json reply;
  try {
    reply = poster.post(json{{"model", poster.descriptor().model},
                             {"input", std::vector<std::string>(tokens.begin(), tokens.end())}});
  } catch (const MalformedReplyError&) {
    throw;
  } catch (const TransportError& e) {
    return RemoteEmbedding{fallback.embed(tokens),
                           std::string("embedding service unavailable, using local provider: ") + e.what()};
  }
  if (!reply.is_object() || !reply.contains("data") || !reply["data"].is_array())
    throw MalformedReplyError("embedding reply has no data array");
  const json& data = reply["data"];
  if (data.size() != tokens.size())
    throw MalformedReplyError("embedding reply count " + std::to_string(data.size()) + " != " +
                              std::to_string(tokens.size()));
  RemoteEmbedding out;
  for (const auto& item : data) {
    if (!item.is_object() || !item.contains("embedding") || !item["embedding"].is_array())
      throw MalformedReplyError("embedding item without vector");
    EmbeddingVector v;
    for (const auto& x : item["embedding"]) {
      if (!x.is_number()) throw MalformedReplyError("non-numeric embedding entry");
      v.values.push_back(x.get<double>());
      if (!std::isfinite(v.values.back())) throw MalformedReplyError("non-finite embedding entry");
    }
    if (v.dimension() != dimension)
      throw MalformedReplyError("embedding dimension " + std::to_string(v.dimension()) + " != declared " +
                                std::to_string(dimension));
    out.vectors.push_back(std::move(v));
  }
  return out;
}

// EmbeddingProvider backed by a remote service; fallback warnings are
// collected for the caller's trace.
class RemoteEmbeddingProvider final : public EmbeddingProvider {
 public:
  RemoteEmbeddingProvider(ProviderDescriptor d, std::size_t dimension, std::uint64_t seed)
      : poster_(std::move(d)), dimension_(dimension), fallback_(dimension, seed) {}

  std::size_t dimension() const override { return dimension_; }

  std::vector<EmbeddingVector> embed(std::span<const std::string> tokens) const override {
    if (tokens.empty()) return {};
    auto r = embed_remote(poster_, dimension_, tokens, fallback_);
    if (r.warning) {
      std::lock_guard lock(mu_);
      warnings_.push_back(*r.warning);
    }
    return std::move(r.vectors);
  }

  std::vector<std::string> drain_warnings() const {
    std::lock_guard lock(mu_);
    return std::exchange(warnings_, {});
  }

 private:
  JsonPoster poster_;
  std::size_t dimension_;
  HashEmbeddingProvider fallback_;
  mutable std::mutex mu_;
  mutable std::vector<std::string> warnings_;
};

}  // namespace gobs
