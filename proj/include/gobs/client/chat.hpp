#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "gobs/client/http.hpp"
#include "gobs/core/config.hpp"
#include "gobs/core/error.hpp"

namespace gobs {

enum class Role { system, user, assistant };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::system: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "?";
}

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "system") return Role::system;
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  return std::nullopt;
}

struct ChatMessage {
  Role role = Role::user;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct ChatParams {
  double temperature = 0.7;
  int max_tokens = 256;  // hint only; gating still checks length
};

inline json to_json(const ChatMessage& m) { return json{{"role", to_string(m.role)}, {"content", m.content}}; }

// A chat-completion model. HTTP clients are reentrant; scripted clients
// belong to a single session.
class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual std::string complete(std::span<const ChatMessage> messages, const ChatParams& params) = 0;
};

// Pops responses in order; throws ScriptExhaustedError once empty.
class ScriptedChatClient final : public ChatClient {
 public:
  explicit ScriptedChatClient(std::vector<std::string> responses)
      : responses_(responses.begin(), responses.end()) {}

  std::string complete(std::span<const ChatMessage> messages, const ChatParams&) override {
    if (messages.empty()) throw PreconditionError("chat_complete: no messages");
    std::lock_guard lock(mu_);
    if (responses_.empty()) throw ScriptExhaustedError("scripted provider exhausted");
    std::string r = std::move(responses_.front());
    responses_.pop_front();
    ++calls_;
    return r;
  }

  std::size_t calls() const { return calls_; }
  std::size_t remaining() const { return responses_.size(); }

 private:
  std::mutex mu_;
  std::deque<std::string> responses_;
  std::size_t calls_ = 0;
};

// Computes each reply from the outgoing messages. Used for scripted policies
// such as "verbose first, concise after forced feedback".
class CallbackChatClient final : public ChatClient {
 public:
  using Fn = std::function<std::string(std::span<const ChatMessage>, const ChatParams&)>;
  explicit CallbackChatClient(Fn fn) : fn_(std::move(fn)) {}

  std::string complete(std::span<const ChatMessage> messages, const ChatParams& params) override {
    if (messages.empty()) throw PreconditionError("chat_complete: no messages");
    ++calls_;
    return fn_(messages, params);
  }
  std::size_t calls() const { return calls_; }

 private:
  Fn fn_;
  std::size_t calls_ = 0;
};

inline json chat_request_body(const std::string& model, std::span<const ChatMessage> messages,
                              const ChatParams& params) {
  json msgs = json::array();
  for (const auto& m : messages) msgs.push_back(to_json(m));
  return json{{"model", model},
              {"messages", msgs},
              {"temperature", params.temperature},
              {"max_tokens", params.max_tokens}};
}

inline std::string chat_reply_content(const json& reply) {
  if (!reply.is_object() || !reply.contains("choices") || !reply["choices"].is_array() ||
      reply["choices"].empty())
    throw MalformedReplyError("upstream reply has no choices");
  const json& c0 = reply["choices"][0];
  if (!c0.is_object() || !c0.contains("message") || !c0["message"].is_object() ||
      !c0["message"].contains("content") || !c0["message"]["content"].is_string())
    throw MalformedReplyError("upstream reply has no choices[0].message.content");
  return c0["message"]["content"].get<std::string>();
}

// Chat-completions over HTTP: {model, messages[], temperature, max_tokens} ->
// choices[0].message.content.
class HttpChatClient final : public ChatClient {
 public:
  explicit HttpChatClient(ProviderDescriptor d) : poster_(std::move(d)) {}

  std::string complete(std::span<const ChatMessage> messages, const ChatParams& params) override {
    if (messages.empty()) throw PreconditionError("chat_complete: no messages");
    return chat_reply_content(poster_.post(chat_request_body(poster_.descriptor().model, messages, params)));
  }

  int attempts_made() const { return poster_.attempts_made(); }

 private:
  JsonPoster poster_;
};

inline std::unique_ptr<ChatClient> make_chat_client(const ProviderDescriptor& d) {
  if (d.kind == ProviderKind::scripted) return std::make_unique<ScriptedChatClient>(d.responses);
  return std::make_unique<HttpChatClient>(d);
}

// One-shot completion against a provider descriptor.
inline std::string chat_complete(const ProviderDescriptor& provider, std::span<const ChatMessage> messages,
                                 const ChatParams& params) {
  if (messages.empty()) throw PreconditionError("chat_complete: no messages");
  return make_chat_client(provider)->complete(messages, params);
}

}  // namespace gobs
