#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gobs/engine/engine.hpp"
#include "gobs/eval/corpus.hpp"
#include "gobs/eval/report.hpp"
#include "gobs/eval/score.hpp"

namespace gobs {

// Builds the base-model client for one source conversation.
using ClientFactory = std::function<std::unique_ptr<ChatClient>(const Conversation& source)>;

inline std::uint64_t conversation_seed(std::uint64_t base, const std::string& conversation_id) {
  return base ^ detail::fnv1a64(conversation_id);
}

// Offline base model: answers the k-th user message with the recorded agent
// reply that followed the k-th human turn of the source conversation.
// Regenerations of a turn receive the same text.
class RecordedReplyClient final : public ChatClient {
 public:
  explicit RecordedReplyClient(const Conversation& source) {
    std::optional<std::size_t> open;
    for (const auto& t : source.turns) {
      if (t.placeholder) continue;
      if (t.speaker == Speaker::human) {
        replies_.emplace_back();
        open = replies_.size() - 1;
      } else if (open) {
        replies_[*open] = t.text;
        open.reset();
      }
    }
  }

  std::string complete(std::span<const ChatMessage> messages, const ChatParams&) override {
    std::size_t users = 0;
    for (const auto& m : messages) users += m.role == Role::user ? 1 : 0;
    if (users == 0 || users > replies_.size() || !replies_[users - 1])
      throw ScriptExhaustedError("no recorded agent reply for human turn " + std::to_string(users));
    return *replies_[users - 1];
  }

 private:
  std::vector<std::optional<std::string>> replies_;
};

struct EvalFailure {
  std::string conversation_id;
  std::size_t input_index = 0;
  std::string message;
};

struct EvalResult {
  GatingMode mode = GatingMode::observer;
  std::vector<Conversation> generated;
  std::vector<EvaluationRecord> records;
  std::vector<EvalFailure> failures;
  std::vector<ConversationScores> scores;
  std::vector<CriterionMeans> means;
  TriggerStats triggers;

  ReportInput report_input() const {
    ReportInput in;
    in.mode = mode == GatingMode::observer ? "observer" : "base";
    in.conversations = generated.size();
    in.scores = scores;
    in.means = means;
    in.triggers = triggers;
    return in;
  }
};

// Replays each conversation's human turns against the engine, then scores
// the regenerated conversations. When `trace_path` is set every record is
// appended there as {"conv": id, "record": {...}}.
inline EvalResult run_eval(const Corpus& corpus, EngineContext ctx, const ClientFactory& factory, GatingMode mode,
                           const std::optional<std::filesystem::path>& trace_path = std::nullopt) {
  ctx.mode = mode;
  EvalResult out;
  out.mode = mode;
  std::ofstream traces;
  if (trace_path) {
    if (trace_path->has_parent_path()) std::filesystem::create_directories(trace_path->parent_path());
    traces.open(*trace_path, std::ios::binary | std::ios::trunc);
    if (!traces) throw Error("cannot open trace file " + trace_path->string());
  }
  for (const auto& source : corpus.conversations) {
    std::vector<std::string> human;
    for (const auto& t : source.turns)
      if (t.speaker == Speaker::human && !t.placeholder) human.push_back(t.text);
    auto client = factory(source);
    ScriptedInput input(human);
    auto r = run_session(input, ctx, {client.get(), nullptr}, conversation_seed(ctx.config->rng_seed, source.id),
                         source.id);
    for (auto& f : r.failures) out.failures.push_back({source.id, f.input_index, f.message});
    for (auto& rec : r.records) {
      if (trace_path) traces << json{{"conv", source.id}, {"record", to_json(rec)}}.dump() << '\n';
      out.triggers.add(rec);
      out.records.push_back(std::move(rec));
    }
    r.conversation.id = source.id;
    out.scores.push_back(auto_score(r.conversation, *ctx.config, ctx.extractors));
    out.generated.push_back(std::move(r.conversation));
  }
  if (trace_path) {
    traces.flush();
    if (!traces) throw Error("cannot write trace file " + trace_path->string());
  }
  out.means = means_from_scores(out.scores);
  return out;
}

struct ScoreResult {
  std::vector<ConversationScores> scores;
  std::vector<CriterionMeans> means;
  bool from_annotations = false;
  std::vector<std::pair<Criterion, std::optional<double>>> agreement;

  ReportInput report_input(std::size_t conversations) const {
    ReportInput in;
    in.title = "Scoring report";
    in.conversations = conversations;
    in.scores = scores;
    in.means = means;
    in.agreement = agreement;
    return in;
  }
};

// Automatic scores for every turn. Human-likeness comes from rater
// annotations when the corpus has any, otherwise from the automatic scores.
inline ScoreResult score_corpus(const Corpus& corpus, const EngineConfig& config, const Extractors& extractors) {
  ScoreResult out;
  for (const auto& c : corpus.conversations) out.scores.push_back(auto_score(c, config, extractors));
  out.from_annotations = !corpus.annotations.empty();
  out.means = out.from_annotations ? means_from_annotations(corpus) : means_from_scores(out.scores);
  if (out.from_annotations)
    for (Criterion c : kAllCriteria) {
      std::optional<double> k;
      try {
        k = stats::cohens_kappa(agreement_table(corpus, out.scores, c));
      } catch (const PreconditionError&) {
      }
      out.agreement.push_back({c, k});
    }
  return out;
}

}  // namespace gobs
