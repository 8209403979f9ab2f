#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "gobs/core/error.hpp"
#include "gobs/core/types.hpp"

namespace gobs {

using json = nlohmann::json;

// Weights of the combined tone score: C = H*holistic + (1/n) * sum(s_i * w_i).
// An empty `sentence` list means every sentence uses `uniform_sentence`.
// Sentences past the end of an explicit list reuse its last weight.
struct ToneWeights {
  double holistic = 0.5;
  double uniform_sentence = 0.5;
  std::vector<double> sentence;

  double weight_for(std::size_t i) const {
    if (sentence.empty()) return uniform_sentence;
    return i < sentence.size() ? sentence[i] : sentence.back();
  }
  double max_sentence_weight() const {
    if (sentence.empty()) return uniform_sentence;
    return *std::max_element(sentence.begin(), sentence.end());
  }
  bool operator==(const ToneWeights&) const = default;
};

struct SpecificityLimits {
  int max_entities = 4;
  int max_descriptive = 4;
  bool operator==(const SpecificityLimits&) const = default;
};

enum class ProviderKind { http_chat, scripted };

// How to reach a chat model. The credential is referenced by environment
// variable name only; the secret itself never enters a config or a trace.
struct ProviderDescriptor {
  ProviderKind kind = ProviderKind::scripted;
  std::string url;    // full endpoint, e.g. http://127.0.0.1:8080/v1/chat/completions
  std::string model = "base";
  int timeout_ms = 30000;
  int max_retries = 2;
  int backoff_ms = 200;
  std::string credential_env;
  std::vector<std::string> responses;  // scripted only
  bool operator==(const ProviderDescriptor&) const = default;
};

enum class EmbeddingKind { hash, http };

struct EmbeddingSettings {
  EmbeddingKind kind = EmbeddingKind::hash;
  int dimension = 64;
  std::uint64_t seed = 0x9e3779b97f4a7c15ULL;
  ProviderDescriptor remote;  // url/model/timeout/retries/credential for kind == http
  bool operator==(const EmbeddingSettings&) const = default;
};

// Which earlier turn the coherence gain is measured against.
enum class CoherenceReference { previous_agent, previous_human };

// Bin edges mapping raw features onto 1..5 Likert-equivalent scores.
struct LikertBins {
  std::array<double, 4> brevity_tokens{20, 40, 60, 90};      // <= edge[k] -> 5-k, else 1
  std::array<double, 4> tone{-0.6, -0.2, 0.2, 0.6};          // < edge[k] -> 1+k, else 5
  std::array<double, 4> specificity{0.2, 0.4, 0.6, 0.8};     // < edge[k] -> 5-k, else 1
  std::array<double, 4> coherence_gain{0.1, 0.25, 0.5, 1.0}; // < edge[k] -> 5-k, else 1
  bool operator==(const LikertBins&) const = default;
};

struct GenerationParams {
  double temperature = 0.7;
  int max_tokens = 256;
  bool operator==(const GenerationParams&) const = default;
};

struct EngineConfig {
  ToneWeights tone_weights;
  int brevity_limit_tokens = 60;
  SpecificityLimits specificity_max_counts;
  double specificity_limit = 0.6;
  Range tone_acceptable_range{-0.5, 1.0};
  double coherence_threshold = 1.5;
  CoherenceReference coherence_reference = CoherenceReference::previous_agent;
  double assistance_threshold = 0.5;
  std::vector<std::string> assistance_keywords{"help", "assist", "information"};
  int max_regenerations = 3;
  double forced_feedback_probability = 0.1;
  double rigid_cutoff = 0.8;
  std::string base_system_prompt =
      "You are a friendly companion who engages in casual small talk. Keep replies brief, warm, "
      "and on topic.";
  std::uint64_t rng_seed = 42;
  int turn_deadline_ms = 20000;
  bool observer_rewrite = false;
  GenerationParams generation;
  ProviderDescriptor base_provider;
  std::optional<ProviderDescriptor> observer_provider;
  EmbeddingSettings embedding;
  std::string lexicon_path;             // empty: built-in lexicon
  std::string descriptive_lexicon_path; // empty: built-in list
  std::string clauses_path;             // empty: built-in clauses
  LikertBins likert_bins;
  int concurrent_session_limit = 64;

  bool operator==(const EngineConfig&) const = default;
};

inline bool tone_acceptable(double combined, const Range& band) { return band.contains(combined); }

namespace detail {

inline std::string join_key(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

// Walks one JSON object, tracking which keys were consumed so leftovers can
// be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw ConfigError(path_, "expected an object");
  }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    if (it == obj_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  std::string key(const std::string& k) const { return join_key(path_, k); }

  void number(const std::string& k, double& out) {
    if (const json* v = find(k)) {
      if (!v->is_number()) throw ConfigError(key(k), "expected a number");
      out = v->get<double>();
      if (!std::isfinite(out)) throw ConfigError(key(k), "must be finite");
    }
  }
  void integer(const std::string& k, int& out) {
    if (const json* v = find(k)) {
      if (!v->is_number_integer()) throw ConfigError(key(k), "expected an integer");
      auto x = v->get<std::int64_t>();
      if (x < INT32_MIN || x > INT32_MAX) throw ConfigError(key(k), "integer out of range");
      out = static_cast<int>(x);
    }
  }
  void unsigned64(const std::string& k, std::uint64_t& out) {
    if (const json* v = find(k)) {
      if (!v->is_number_unsigned()) throw ConfigError(key(k), "expected a nonnegative integer");
      out = v->get<std::uint64_t>();
    }
  }
  void boolean(const std::string& k, bool& out) {
    if (const json* v = find(k)) {
      if (!v->is_boolean()) throw ConfigError(key(k), "expected a boolean");
      out = v->get<bool>();
    }
  }
  void string(const std::string& k, std::string& out) {
    if (const json* v = find(k)) {
      if (!v->is_string()) throw ConfigError(key(k), "expected a string");
      out = v->get<std::string>();
    }
  }
  void strings(const std::string& k, std::vector<std::string>& out) {
    if (const json* v = find(k)) {
      if (!v->is_array()) throw ConfigError(key(k), "expected an array of strings");
      out.clear();
      for (const auto& e : *v) {
        if (!e.is_string()) throw ConfigError(key(k), "expected an array of strings");
        out.push_back(e.get<std::string>());
      }
    }
  }
  void range(const std::string& k, Range& out) {
    if (const json* v = find(k)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
        throw ConfigError(key(k), "expected [lo, hi]");
      out = Range{(*v)[0].get<double>(), (*v)[1].get<double>()};
    }
  }
  void edges(const std::string& k, std::array<double, 4>& out) {
    if (const json* v = find(k)) {
      if (!v->is_array() || v->size() != 4) throw ConfigError(key(k), "expected 4 bin edges");
      for (std::size_t i = 0; i < 4; ++i) {
        if (!(*v)[i].is_number()) throw ConfigError(key(k), "expected numbers");
        out[i] = (*v)[i].get<double>();
      }
    }
  }

  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(key(it.key()), "unknown key");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

inline json provider_to_json(const ProviderDescriptor& p) {
  json j = {{"kind", p.kind == ProviderKind::http_chat ? "http_chat" : "scripted"},
            {"url", p.url},
            {"model", p.model},
            {"timeout_ms", p.timeout_ms},
            {"max_retries", p.max_retries},
            {"backoff_ms", p.backoff_ms},
            {"credential_env", p.credential_env},
            {"responses", p.responses}};
  return j;
}

inline ProviderDescriptor provider_from_json(const json& j, const std::string& path) {
  ProviderDescriptor p;
  ObjectReader r(j, path);
  std::string kind = "scripted";
  r.string("kind", kind);
  if (kind == "http_chat")
    p.kind = ProviderKind::http_chat;
  else if (kind == "scripted")
    p.kind = ProviderKind::scripted;
  else
    throw ConfigError(r.key("kind"), "expected http_chat or scripted");
  r.string("url", p.url);
  r.string("model", p.model);
  r.integer("timeout_ms", p.timeout_ms);
  r.integer("max_retries", p.max_retries);
  r.integer("backoff_ms", p.backoff_ms);
  r.string("credential_env", p.credential_env);
  r.strings("responses", p.responses);
  r.finish();
  return p;
}

inline void validate_provider(const ProviderDescriptor& p, const std::string& path) {
  if (p.timeout_ms <= 0) throw ConfigError(join_key(path, "timeout_ms"), "must be > 0");
  if (p.max_retries < 0) throw ConfigError(join_key(path, "max_retries"), "must be >= 0");
  if (p.backoff_ms < 0) throw ConfigError(join_key(path, "backoff_ms"), "must be >= 0");
  if (p.kind == ProviderKind::http_chat && p.url.empty())
    throw ConfigError(join_key(path, "url"), "required for http_chat");
}

inline void check_unit(double v, const std::string& key) {
  if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(key, "must be in [0, 1]");
}

inline void check_ascending(const std::array<double, 4>& e, const std::string& key) {
  for (std::size_t i = 1; i < e.size(); ++i)
    if (!(e[i - 1] < e[i])) throw ConfigError(key, "bin edges must be strictly ascending");
}

}  // namespace detail

// Throws ConfigError naming the first key whose value breaks an invariant.
inline void validate_config(const EngineConfig& c) {
  using detail::check_unit;
  const auto& tw = c.tone_weights;
  check_unit(tw.holistic, "tone_weights.holistic");
  if (tw.sentence.empty()) check_unit(tw.uniform_sentence, "tone_weights.sentence");
  for (double w : tw.sentence) check_unit(w, "tone_weights.sentence");
  if (tw.holistic + tw.max_sentence_weight() > 1.0 + 1e-12)
    throw ConfigError("tone_weights", "holistic + sentence weight must not exceed 1");
  if (c.brevity_limit_tokens <= 0) throw ConfigError("brevity_limit_tokens", "must be > 0");
  if (c.specificity_max_counts.max_entities <= 0)
    throw ConfigError("specificity_max_counts.max_entities", "must be > 0");
  if (c.specificity_max_counts.max_descriptive <= 0)
    throw ConfigError("specificity_max_counts.max_descriptive", "must be > 0");
  check_unit(c.specificity_limit, "specificity_limit");
  const Range& band = c.tone_acceptable_range;
  if (!(band.lo >= -1.0 && band.hi <= 1.0 && band.lo <= band.hi))
    throw ConfigError("tone_acceptable_range", "must satisfy -1 <= lo <= hi <= 1");
  if (!(c.coherence_threshold >= 0.0)) throw ConfigError("coherence_threshold", "must be >= 0");
  check_unit(c.assistance_threshold, "assistance_threshold");
  if (c.assistance_keywords.empty())
    throw ConfigError("assistance_keywords", "must not be empty");
  for (const auto& k : c.assistance_keywords)
    if (k.empty()) throw ConfigError("assistance_keywords", "keywords must be non-empty");
  if (c.max_regenerations < 1) throw ConfigError("max_regenerations", "must be >= 1");
  check_unit(c.forced_feedback_probability, "forced_feedback_probability");
  check_unit(c.rigid_cutoff, "rigid_cutoff");
  if (c.turn_deadline_ms < 0) throw ConfigError("turn_deadline_ms", "must be >= 0");
  if (!(c.generation.temperature >= 0.0 && c.generation.temperature <= 2.0))
    throw ConfigError("generation.temperature", "must be in [0, 2]");
  if (c.generation.max_tokens <= 0) throw ConfigError("generation.max_tokens", "must be > 0");
  detail::validate_provider(c.base_provider, "base_provider");
  if (c.observer_provider) detail::validate_provider(*c.observer_provider, "observer_provider");
  if (c.observer_rewrite && !c.observer_provider)
    throw ConfigError("observer_rewrite", "requires observer_provider");
  if (c.embedding.dimension <= 0) throw ConfigError("embedding.dimension", "must be > 0");
  if (c.embedding.kind == EmbeddingKind::http)
    detail::validate_provider(
        ProviderDescriptor{ProviderKind::http_chat, c.embedding.remote.url, "", c.embedding.remote.timeout_ms,
                           c.embedding.remote.max_retries, c.embedding.remote.backoff_ms, "", {}},
        "embedding.remote");
  detail::check_ascending(c.likert_bins.brevity_tokens, "likert_bins.brevity_tokens");
  detail::check_ascending(c.likert_bins.tone, "likert_bins.tone");
  detail::check_ascending(c.likert_bins.specificity, "likert_bins.specificity");
  detail::check_ascending(c.likert_bins.coherence_gain, "likert_bins.coherence_gain");
  if (c.concurrent_session_limit <= 0)
    throw ConfigError("concurrent_session_limit", "must be > 0");
}

inline json to_json(const EngineConfig& c) {
  json tw = {{"holistic", c.tone_weights.holistic}};
  if (c.tone_weights.sentence.empty())
    tw["sentence"] = c.tone_weights.uniform_sentence;
  else
    tw["sentence"] = c.tone_weights.sentence;
  json emb = {{"kind", c.embedding.kind == EmbeddingKind::hash ? "hash" : "http"},
              {"dimension", c.embedding.dimension},
              {"seed", c.embedding.seed},
              {"remote", detail::provider_to_json(c.embedding.remote)}};
  return json{
      {"tone_weights", tw},
      {"brevity_limit_tokens", c.brevity_limit_tokens},
      {"specificity_max_counts",
       {{"max_entities", c.specificity_max_counts.max_entities},
        {"max_descriptive", c.specificity_max_counts.max_descriptive}}},
      {"specificity_limit", c.specificity_limit},
      {"tone_acceptable_range", {c.tone_acceptable_range.lo, c.tone_acceptable_range.hi}},
      {"coherence_threshold", c.coherence_threshold},
      {"coherence_reference", c.coherence_reference == CoherenceReference::previous_agent
                                  ? "previous_agent"
                                  : "previous_human"},
      {"assistance_threshold", c.assistance_threshold},
      {"assistance_keywords", c.assistance_keywords},
      {"max_regenerations", c.max_regenerations},
      {"forced_feedback_probability", c.forced_feedback_probability},
      {"rigid_cutoff", c.rigid_cutoff},
      {"base_system_prompt", c.base_system_prompt},
      {"rng_seed", c.rng_seed},
      {"turn_deadline_ms", c.turn_deadline_ms},
      {"observer_rewrite", c.observer_rewrite},
      {"generation",
       {{"temperature", c.generation.temperature}, {"max_tokens", c.generation.max_tokens}}},
      {"base_provider", detail::provider_to_json(c.base_provider)},
      {"observer_provider",
       c.observer_provider ? detail::provider_to_json(*c.observer_provider) : json(nullptr)},
      {"embedding", emb},
      {"lexicon_path", c.lexicon_path},
      {"descriptive_lexicon_path", c.descriptive_lexicon_path},
      {"clauses_path", c.clauses_path},
      {"likert_bins",
       {{"brevity_tokens", c.likert_bins.brevity_tokens},
        {"tone", c.likert_bins.tone},
        {"specificity", c.likert_bins.specificity},
        {"coherence_gain", c.likert_bins.coherence_gain}}},
      {"concurrent_session_limit", c.concurrent_session_limit},
  };
}

// Builds a config from an already-parsed tree. Omitted keys keep defaults.
inline EngineConfig config_from_json(const json& doc) {
  EngineConfig c;
  detail::ObjectReader r(doc, "");
  if (const json* tw = r.find("tone_weights")) {
    detail::ObjectReader t(*tw, "tone_weights");
    t.number("holistic", c.tone_weights.holistic);
    if (const json* s = t.find("sentence")) {
      if (s->is_number()) {
        c.tone_weights.uniform_sentence = s->get<double>();
        c.tone_weights.sentence.clear();
      } else if (s->is_array() && !s->empty()) {
        c.tone_weights.sentence.clear();
        for (const auto& w : *s) {
          if (!w.is_number()) throw ConfigError("tone_weights.sentence", "expected numbers");
          c.tone_weights.sentence.push_back(w.get<double>());
        }
      } else {
        throw ConfigError("tone_weights.sentence", "expected a number or a non-empty array");
      }
    }
    t.finish();
  }
  r.integer("brevity_limit_tokens", c.brevity_limit_tokens);
  if (const json* sm = r.find("specificity_max_counts")) {
    detail::ObjectReader s(*sm, "specificity_max_counts");
    s.integer("max_entities", c.specificity_max_counts.max_entities);
    s.integer("max_descriptive", c.specificity_max_counts.max_descriptive);
    s.finish();
  }
  r.number("specificity_limit", c.specificity_limit);
  r.range("tone_acceptable_range", c.tone_acceptable_range);
  r.number("coherence_threshold", c.coherence_threshold);
  {
    std::string ref;
    r.string("coherence_reference", ref);
    if (ref == "previous_agent")
      c.coherence_reference = CoherenceReference::previous_agent;
    else if (ref == "previous_human")
      c.coherence_reference = CoherenceReference::previous_human;
    else if (!ref.empty())
      throw ConfigError("coherence_reference", "expected previous_agent or previous_human");
  }
  r.number("assistance_threshold", c.assistance_threshold);
  r.strings("assistance_keywords", c.assistance_keywords);
  r.integer("max_regenerations", c.max_regenerations);
  r.number("forced_feedback_probability", c.forced_feedback_probability);
  r.number("rigid_cutoff", c.rigid_cutoff);
  r.string("base_system_prompt", c.base_system_prompt);
  r.unsigned64("rng_seed", c.rng_seed);
  r.integer("turn_deadline_ms", c.turn_deadline_ms);
  r.boolean("observer_rewrite", c.observer_rewrite);
  if (const json* g = r.find("generation")) {
    detail::ObjectReader gr(*g, "generation");
    gr.number("temperature", c.generation.temperature);
    gr.integer("max_tokens", c.generation.max_tokens);
    gr.finish();
  }
  if (const json* p = r.find("base_provider"))
    c.base_provider = detail::provider_from_json(*p, "base_provider");
  if (const json* p = r.find("observer_provider"))
    c.observer_provider = detail::provider_from_json(*p, "observer_provider");
  if (const json* e = r.find("embedding")) {
    detail::ObjectReader er(*e, "embedding");
    std::string kind;
    er.string("kind", kind);
    if (kind == "http")
      c.embedding.kind = EmbeddingKind::http;
    else if (kind == "hash")
      c.embedding.kind = EmbeddingKind::hash;
    else if (!kind.empty())
      throw ConfigError("embedding.kind", "expected hash or http");
    er.integer("dimension", c.embedding.dimension);
    er.unsigned64("seed", c.embedding.seed);
    if (const json* rem = er.find("remote"))
      c.embedding.remote = detail::provider_from_json(*rem, "embedding.remote");
    er.finish();
  }
  r.string("lexicon_path", c.lexicon_path);
  r.string("descriptive_lexicon_path", c.descriptive_lexicon_path);
  r.string("clauses_path", c.clauses_path);
  if (const json* lb = r.find("likert_bins")) {
    detail::ObjectReader b(*lb, "likert_bins");
    b.edges("brevity_tokens", c.likert_bins.brevity_tokens);
    b.edges("tone", c.likert_bins.tone);
    b.edges("specificity", c.likert_bins.specificity);
    b.edges("coherence_gain", c.likert_bins.coherence_gain);
    b.finish();
  }
  r.integer("concurrent_session_limit", c.concurrent_session_limit);
  r.finish();
  validate_config(c);
  return c;
}

// Parses a config document. An empty or whitespace-only document yields defaults.
inline EngineConfig load_config(std::string_view document) {
  if (document.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    EngineConfig c;
    validate_config(c);
    return c;
  }
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("config parse failure: ") + e.what());
  }
  return config_from_json(doc);
}

inline std::string serialize_config(const EngineConfig& c) { return to_json(c).dump(2); }

// Applies an RFC 7386 merge patch to the config's tree form and revalidates.
inline EngineConfig merge_config_patch(const EngineConfig& base, const json& patch) {
  if (!patch.is_object()) throw ConfigError("", "config patch must be an object");
  json merged = to_json(base);
  merged.merge_patch(patch);
  return config_from_json(merged);
}

}  // namespace gobs
