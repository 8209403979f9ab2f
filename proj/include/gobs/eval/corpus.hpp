#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "gobs/core/error.hpp"
#include "gobs/core/config.hpp"
#include "gobs/core/types.hpp"
#include "gobs/extract/lexicon.hpp"

namespace gobs {

// The four small-talk criteria raters scored on 5-point scales.
enum class Criterion { brevity, tone, specificity, coherence };

inline constexpr std::array<Criterion, 4> kAllCriteria = {Criterion::brevity, Criterion::tone,
                                                          Criterion::specificity, Criterion::coherence};

inline std::string_view to_string(Criterion c) {
  switch (c) {
    case Criterion::brevity: return "brevity";
    case Criterion::tone: return "tone";
    case Criterion::specificity: return "specificity";
    case Criterion::coherence: return "coherence";
  }
  return "?";
}

inline std::optional<Criterion> parse_criterion(std::string_view s) {
  for (Criterion c : kAllCriteria)
    if (to_string(c) == s) return c;
  return std::nullopt;
}

struct LikertAnnotation {
  std::string conversation_id;
  std::size_t turn = 0;
  std::string rater_id;
  Criterion criterion = Criterion::brevity;
  int score = 3;  // 1..5
  bool operator==(const LikertAnnotation&) const = default;
};

struct Corpus {
  std::vector<Conversation> conversations;
  std::vector<LikertAnnotation> annotations;

  const Conversation* find(const std::string& id) const {
    for (const auto& c : conversations)
      if (c.id == id) return &c;
    return nullptr;
  }
};

namespace detail {

inline void check_keys(const json& j, std::initializer_list<const char*> allowed, std::size_t line) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed) ok = ok || it.key() == k;
    if (!ok) throw DataError(line, "unknown key '" + it.key() + "'");
  }
}

inline std::string conv_id(const json& v, std::size_t line) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw DataError(line, "'conv' must be a string or integer");
}

}  // namespace detail

// Parses corpus JSONL. Each line is either a turn record
//   {"conv": id, "turn": n, "speaker": "human"|"agent", "text": "..."}
// or an annotation record
//   {"conv": id, "turn": n, "rater": id, "criterion": "brevity"|..., "score": 1..5}.
// Turns of a conversation must arrive in order starting at 0. Errors name the line.
inline Corpus parse_corpus(std::string_view text, Corpus into = {}) {
  std::map<std::string, std::size_t> conv_index;
  for (std::size_t i = 0; i < into.conversations.size(); ++i) conv_index[into.conversations[i].id] = i;
  std::set<std::tuple<std::string, std::size_t, std::string, Criterion>> seen;
  for (const auto& a : into.annotations) seen.insert({a.conversation_id, a.turn, a.rater_id, a.criterion});

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() : nl + 1;
    ++line_no;
    if (detail::trim(line).empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(line_no, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object()) throw DataError(line_no, "record must be an object");
    if (!j.contains("conv") || !j.contains("turn")) throw DataError(line_no, "missing 'conv' or 'turn'");
    auto id = detail::conv_id(j["conv"], line_no);
    if (!j["turn"].is_number_unsigned()) throw DataError(line_no, "'turn' must be a nonnegative integer");
    auto turn = j["turn"].get<std::size_t>();

    if (j.contains("speaker")) {
      detail::check_keys(j, {"conv", "turn", "speaker", "text", "placeholder", "timestamp_ms"}, line_no);
      if (!j["speaker"].is_string()) throw DataError(line_no, "'speaker' must be a string");
      auto sp = j["speaker"].get<std::string>();
      if (sp != "human" && sp != "agent") throw DataError(line_no, "speaker must be human or agent");
      if (!j.contains("text") || !j["text"].is_string()) throw DataError(line_no, "'text' must be a string");
      auto [it, inserted] = conv_index.try_emplace(id, into.conversations.size());
      if (inserted) into.conversations.push_back(Conversation{id, {}, {}});
      auto& conv = into.conversations[it->second];
      if (turn != conv.turns.size())
        throw DataError(line_no, "conversation '" + id + "': expected turn " + std::to_string(conv.turns.size()) +
                                     ", got " + std::to_string(turn));
      Turn t{parse_speaker(sp), j["text"].get<std::string>(), turn, std::nullopt, j.value("placeholder", false)};
      if (j.contains("timestamp_ms") && j["timestamp_ms"].is_number_integer())
        t.timestamp_ms = j["timestamp_ms"].get<std::int64_t>();
      if (t.text.empty() && !t.placeholder) throw DataError(line_no, "empty text on a non-placeholder turn");
      conv.turns.push_back(std::move(t));
    } else if (j.contains("rater")) {
      detail::check_keys(j, {"conv", "turn", "rater", "criterion", "score"}, line_no);
      LikertAnnotation a;
      a.conversation_id = id;
      a.turn = turn;
      a.rater_id = j["rater"].is_string() ? j["rater"].get<std::string>()
                                          : detail::conv_id(j["rater"], line_no);
      if (!j.contains("criterion") || !j["criterion"].is_string()) throw DataError(line_no, "'criterion' must be a string");
      auto c = parse_criterion(j["criterion"].get<std::string>());
      if (!c) throw DataError(line_no, "unknown criterion '" + j["criterion"].get<std::string>() + "'");
      a.criterion = *c;
      if (!j.contains("score") || !j["score"].is_number_integer()) throw DataError(line_no, "'score' must be an integer");
      a.score = j["score"].get<int>();
      if (a.score < 1 || a.score > 5) throw DataError(line_no, "score must be in 1..5");
      if (!seen.insert({a.conversation_id, a.turn, a.rater_id, a.criterion}).second)
        throw DataError(line_no, "duplicate annotation for conversation '" + id + "' turn " + std::to_string(turn) +
                                     " rater '" + a.rater_id + "' criterion " + std::string(to_string(a.criterion)));
      into.annotations.push_back(std::move(a));
    } else {
      throw DataError(line_no, "record is neither a turn nor an annotation");
    }
  }
  return into;
}

inline Corpus ingest_corpus(const std::string& path, Corpus into = {}) {
  std::string text;
  try {
    text = detail::read_file(path);
  } catch (const DataError&) {
    throw DataError(0, "cannot read corpus '" + path + "'");
  }
  return parse_corpus(text, std::move(into));
}

}  // namespace gobs
