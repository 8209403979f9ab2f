#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gobs/client/chat.hpp"
#include "gobs/client/embedding_remote.hpp"
#include "gobs/core/config.hpp"
#include "gobs/core/rules.hpp"
#include "gobs/engine/record.hpp"
#include "gobs/extract/features.hpp"
#include "gobs/gate/decision.hpp"
#include "gobs/gate/rng.hpp"
#include "gobs/observer/directive.hpp"
#include "gobs/observer/rewrite.hpp"
#include "gobs/overlay/descriptor.hpp"

namespace gobs {

// Milliseconds on some monotonic or wall timeline.
using Clock = std::function<std::int64_t()>;

inline std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

// A clock that advances by `step` on every read; makes traces replayable.
inline Clock manual_clock(std::int64_t start = 0, std::int64_t step = 1) {
  auto t = std::make_shared<std::int64_t>(start);
  return [t, step] {
    std::int64_t now = *t;
    *t += step;
    return now;
  };
}

enum class GatingMode { observer, base };

// Everything a turn needs besides the session state and the model clients.
struct EngineContext {
  std::shared_ptr<const EngineConfig> config;
  RuleSet rules;
  Extractors extractors;
  ClauseTable clauses = ClauseTable::builtin();
  Clock clock = system_clock_ms;
  GatingMode mode = GatingMode::observer;
  std::optional<std::string> forced_exemplar;

  static EngineContext make(EngineConfig config, std::optional<RuleSet> rules = std::nullopt) {
    EngineContext ctx;
    ctx.extractors = Extractors::local(config);
    if (config.embedding.kind == EmbeddingKind::http)
      ctx.extractors.embeddings = std::make_shared<RemoteEmbeddingProvider>(
          config.embedding.remote, static_cast<std::size_t>(config.embedding.dimension), config.embedding.seed);
    if (!config.clauses_path.empty()) ctx.clauses = ClauseTable::load(config.clauses_path);
    ctx.rules = rules ? std::move(*rules) : default_rules(config);
    ctx.config = std::make_shared<const EngineConfig>(std::move(config));
    return ctx;
  }
};

struct EngineClients {
  ChatClient* base = nullptr;
  ChatClient* observer = nullptr;  // used only when config.observer_rewrite is set
};

// Raised when the base model cannot produce a candidate; carries the
// partial trace of the failed turn.
class TurnError : public Error {
 public:
  TurnError(const std::string& what, EvaluationRecord partial)
      : Error(what), partial_(std::move(partial)) {}
  const EvaluationRecord& partial() const noexcept { return partial_; }

 private:
  EvaluationRecord partial_;
};

struct TurnResult {
  Turn accepted;
  EvaluationRecord record;
  std::optional<FeedbackDirective> next_pending;
};

inline constexpr std::string_view kImplicitNotePrefix = "Observer note: ";

// base prompt, conversation turns, pending implicit note, this turn's forced directives.
inline std::vector<ChatMessage> build_messages(const EngineConfig& config, const Conversation& conv,
                                               const std::optional<FeedbackDirective>& pending,
                                               const std::vector<FeedbackDirective>& forced) {
  std::vector<ChatMessage> msgs;
  msgs.push_back({Role::system, config.base_system_prompt});
  for (const auto& t : conv.turns)
    msgs.push_back({t.speaker == Speaker::human ? Role::user : Role::assistant, t.text});
  if (pending) msgs.push_back({Role::system, std::string(kImplicitNotePrefix) + pending->text});
  for (const auto& f : forced) msgs.push_back({Role::system, f.text});
  return msgs;
}

// Text the coherence gain of a new agent reply is measured against.
inline std::optional<std::string> coherence_reference(const Conversation& conv, CoherenceReference which) {
  Speaker want = which == CoherenceReference::previous_agent ? Speaker::agent : Speaker::human;
  for (auto it = conv.turns.rbegin(); it != conv.turns.rend(); ++it)
    if (it->speaker == want) return it->text;
  return std::nullopt;
}

// One gated agent turn: generate, extract, evaluate, decide; regenerate on
// reject with the forced directives of this turn appended to the prompt.
inline TurnResult respond(const Conversation& conversation, const std::optional<FeedbackDirective>& pending,
                          const EngineContext& ctx, EngineClients clients, RngState& rng,
                          const std::string& session_id = {}) {
  if (conversation.turns.empty() || conversation.turns.back().speaker != Speaker::human)
    throw PreconditionError("respond: last turn must be human");
  if (!clients.base) throw PreconditionError("respond: no base model client");
  const EngineConfig& config = *ctx.config;

  EvaluationRecord rec;
  rec.session_id = session_id;
  rec.turn = conversation.turns.size();
  rec.injected_implicit = pending;

  const auto reference = coherence_reference(conversation, config.coherence_reference);
  const ChatParams params{config.generation.temperature, config.generation.max_tokens};
  const std::int64_t started = ctx.clock();
  const std::int64_t deadline = started + config.turn_deadline_ms;
  std::vector<FeedbackDirective> forced;

  for (int attempt = 0;; ++attempt) {
    auto messages = build_messages(config, conversation, pending, forced);
    const std::int64_t t0 = ctx.clock();
    std::string text;
    try {
      text = clients.base->complete(messages, params);
    } catch (const std::exception& e) {
      rec.rng_counter = rng.counter();
      throw TurnError(std::string("base model failure: ") + e.what(), std::move(rec));
    }
    CandidateAction cand;
    cand.text = std::move(text);
    cand.attempt = attempt;
    cand.features = extract_all(cand.text, reference, config, ctx.extractors);
    cand.descriptors = evaluate_all(ctx.rules, cand.features);
    if (auto* remote = dynamic_cast<const RemoteEmbeddingProvider*>(ctx.extractors.embeddings.get()))
      for (auto& w : remote->drain_warnings()) rec.warnings.push_back(std::move(w));

    GateDecision decision;
    decision.attempt = attempt;
    if (ctx.mode == GatingMode::observer)
      decision = decide(cand.descriptors, ctx.rules, attempt, rng, config, ctx.clauses, ctx.forced_exemplar);

    if (decision.kind == DecisionKind::reject && ctx.clock() >= deadline) {
      decision.kind = DecisionKind::accept;
      decision.directive.reset();
      decision.budget_exhausted = true;
      rec.warnings.push_back("turn deadline of " + std::to_string(config.turn_deadline_ms) +
                             " ms exceeded; accepting best candidate");
    }
    if (decision.directive && config.observer_rewrite && clients.observer) {
      auto rw = rewrite_with_model(*decision.directive, *clients.observer, ctx.clauses);
      decision.directive = std::move(rw.directive);
      if (rw.warning) rec.warnings.push_back(*rw.warning);
    }
    cand.wall_time_ms = ctx.clock() - t0;
    rec.candidates.push_back(std::move(cand));
    rec.decisions.push_back(decision);

    if (decision.kind == DecisionKind::reject) {
      ++rec.forced_count;
      forced.push_back(*decision.directive);
      continue;
    }
    rec.accepted_index = decision.budget_exhausted
                             ? rank_candidates(rec.candidates, &CandidateAction::descriptors)
                             : rec.candidates.size() - 1;
    rec.accepted_text = rec.candidates[rec.accepted_index].text;
    if (decision.kind == DecisionKind::accept_with_implicit) rec.pending_implicit = decision.directive;
    break;
  }
  rec.rng_counter = rng.counter();

  TurnResult out;
  out.accepted = Turn{Speaker::agent, rec.accepted_text, conversation.turns.size(), ctx.clock(), false};
  out.next_pending = rec.pending_implicit;
  out.record = std::move(rec);
  return out;
}

// Mutable per-session state; one engine loop per session at a time.
struct SessionState {
  std::string id;
  Conversation conversation;
  std::optional<FeedbackDirective> pending_implicit;
  RngState rng;
};

// Appends the human turn, runs one gated turn and appends the reply. On
// failure the human turn is withdrawn and the error rethrown.
inline EvaluationRecord session_turn(SessionState& s, const std::string& human_text,
                                     const EngineContext& ctx, EngineClients clients) {
  s.conversation.append(Speaker::human, human_text, ctx.clock());
  try {
    auto r = respond(s.conversation, s.pending_implicit, ctx, clients, s.rng, s.id);
    s.conversation.turns.push_back(std::move(r.accepted));
    s.pending_implicit = std::move(r.next_pending);
    return std::move(r.record);
  } catch (...) {
    s.conversation.turns.pop_back();
    throw;
  }
}

// Source of human turns for run_session.
class InputSource {
 public:
  virtual ~InputSource() = default;
  virtual std::optional<std::string> next() = 0;
};

class ScriptedInput final : public InputSource {
 public:
  explicit ScriptedInput(std::vector<std::string> lines) : lines_(std::move(lines)) {}
  std::optional<std::string> next() override {
    if (pos_ >= lines_.size()) return std::nullopt;
    return lines_[pos_++];
  }

 private:
  std::vector<std::string> lines_;
  std::size_t pos_ = 0;
};

struct TurnFailure {
  std::size_t input_index = 0;
  std::string message;
  EvaluationRecord partial;
};

struct SessionResult {
  Conversation conversation;
  std::vector<EvaluationRecord> records;
  std::vector<TurnFailure> failures;
};

inline SessionResult run_session(InputSource& input, const EngineContext& ctx, EngineClients clients,
                                 std::uint64_t seed, const std::string& session_id = "session") {
  SessionState s;
  s.id = session_id;
  s.conversation.id = session_id;
  s.rng = RngState(seed);
  SessionResult out;
  std::size_t index = 0;
  while (auto line = input.next()) {
    try {
      out.records.push_back(session_turn(s, *line, ctx, clients));
    } catch (const TurnError& e) {
      out.failures.push_back({index, e.what(), e.partial()});
    }
    ++index;
  }
  out.conversation = std::move(s.conversation);
  return out;
}

}  // namespace gobs
