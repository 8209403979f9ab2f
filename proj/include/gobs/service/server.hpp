#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
#include "json.hpp"

#include "gobs/client/chat.hpp"
#include "gobs/core/config.hpp"
#include "gobs/core/rules.hpp"
#include "gobs/engine/engine.hpp"
#include "gobs/service/store.hpp"

namespace gobs {

// Ordered per-session event log backing the server-sent event stream.
// Event ids start at 1 and are dense.
class EventLog {
 public:
  struct Event {
    std::uint64_t id = 0;
    std::string type;  // "record" | "config"
    std::string data;  // JSON text
  };

  std::uint64_t publish(std::string type, std::string data) {
    std::lock_guard lock(mu_);
    events_.push_back(Event{events_.size() + 1, std::move(type), std::move(data)});
    cv_.notify_all();
    return events_.size();
  }

  // Events with id > after; waits up to `wait` when none are available.
  std::vector<Event> since(std::uint64_t after, std::chrono::milliseconds wait) {
    std::unique_lock lock(mu_);
    cv_.wait_for(lock, wait, [&] { return events_.size() > after || closed_; });
    if (after >= events_.size()) return {};
    return {events_.begin() + static_cast<std::ptrdiff_t>(after), events_.end()};
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    cv_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return events_.size();
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<Event> events_;
  bool closed_ = false;
};

inline std::string format_sse(const EventLog::Event& e) {
  std::string out = "id: " + std::to_string(e.id) + "\nevent: " + e.type + "\n";
  std::size_t pos = 0;
  while (true) {
    auto nl = e.data.find('\n', pos);
    out += "data: " + e.data.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos) + "\n";
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  return out + "\n";
}

struct ServiceOptions {
  std::string store_dir;                     // empty: no persistence
  std::optional<std::string> bearer_token;   // required on every request when set
  std::chrono::milliseconds stream_poll{250};
};

inline constexpr const char* kSessionHeader = "X-Observer-Session";
inline constexpr const char* kTraceHeader = "X-Observer-Trace-Id";

// HTTP proxy around the gated engine.
//   POST  /v1/chat/completions        chat-completions in, gated reply out
//   GET   /v1/sessions/{id}/trace     ?from&to (inclusive record positions)
//   GET   /v1/sessions/{id}/events    text/event-stream, resumable via Last-Event-ID
//   GET   /v1/config, PATCH /v1/config
//   GET   /healthz
class ObserverService {
 public:
  using ClientFactory = std::function<std::unique_ptr<ChatClient>(const ProviderDescriptor&)>;

  ObserverService(EngineConfig config, std::optional<RuleSet> rules, ServiceOptions options = {},
                  Clock clock = system_clock_ms)
      : options_(std::move(options)), clock_(std::move(clock)) {
    if (!options_.store_dir.empty()) store_ = std::make_unique<JsonlStore>(options_.store_dir);
    else store_ = std::make_unique<JsonlStore>();
    auto replay = store_->replay();
    if (replay.config) {
      config = config_from_json(*replay.config);
      rules = load_rules(replay.rules->dump());
    }
    context_ = std::make_shared<const EngineContext>(make_context(std::move(config), std::move(rules)));
    replay_warnings_ = replay.warnings;
    for (auto& [id, ps] : replay.sessions) {
      auto s = std::make_shared<Session>();
      s->state = std::move(ps.state);
      s->seed = ps.seed;
      s->created_ms = ps.created_ms;
      s->updated_ms = ps.updated_ms;
      s->records = std::move(ps.records);
      for (const auto& r : s->records) s->events.publish("record", to_json(r).dump());
      sessions_[id] = std::move(s);
    }
    sessions_created_ = sessions_.size();
    install_routes();
  }

  ~ObserverService() { stop(); }

  ObserverService(const ObserverService&) = delete;
  ObserverService& operator=(const ObserverService&) = delete;

  void set_client_factory(ClientFactory f) { factory_ = std::move(f); }

  // Test seam: runs after a turn is durably persisted, before the reply is sent.
  void set_after_persist_hook(std::function<void()> hook) { after_persist_ = std::move(hook); }

  // Binds (port 0 picks a free port) and serves on a background thread.
  int start(const std::string& host = "127.0.0.1", int port = 0) {
    int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  // Blocking variant for the CLI.
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  void stop() {
    stopping_ = true;
    {
      std::lock_guard lock(sessions_mu_);
      for (auto& [_, s] : sessions_) s->events.close();
    }
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::shared_ptr<const EngineContext> context() const {
    std::lock_guard lock(context_mu_);
    return context_;
  }

  const std::vector<std::string>& replay_warnings() const { return replay_warnings_; }

  std::size_t session_count() const {
    std::lock_guard lock(sessions_mu_);
    return sessions_.size();
  }

  httplib::Server& http() { return server_; }

 private:
  struct Session {
    std::mutex turn_mu;
    SessionState state;
    std::uint64_t seed = 0;
    std::unique_ptr<ChatClient> base;
    std::unique_ptr<ChatClient> observer;
    std::vector<EvaluationRecord> records;  // guarded by turn_mu
    EventLog events;
    std::int64_t created_ms = 0;
    std::int64_t updated_ms = 0;
  };

  static EngineContext make_context(EngineConfig config, std::optional<RuleSet> rules) {
    return EngineContext::make(std::move(config), std::move(rules));
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(json{{"error", {{"message", message}, {"code", status}}}}.dump(), "application/json");
  }

  bool authorized(const httplib::Request& req, httplib::Response& res) const {
    if (!options_.bearer_token) return true;
    if (req.get_header_value("Authorization") == "Bearer " + *options_.bearer_token) return true;
    send_error(res, 401, "missing or invalid bearer token");
    return false;
  }

  std::shared_ptr<Session> find_session(const std::string& id) const {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  void ensure_clients(Session& s, const EngineContext& ctx) {
    if (!s.base) s.base = factory_ ? factory_(ctx.config->base_provider) : make_chat_client(ctx.config->base_provider);
    if (!s.observer && ctx.config->observer_provider)
      s.observer = factory_ ? factory_(*ctx.config->observer_provider) : make_chat_client(*ctx.config->observer_provider);
  }

  std::shared_ptr<Session> create_session(const EngineContext& ctx) {
    auto s = std::make_shared<Session>();
    std::string id;
    {
      std::lock_guard lock(sessions_mu_);
      do {
        std::uint64_t state = ctx.config->rng_seed ^ (0x5e55105eULL + sessions_created_++);
        char buf[24];
        std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(detail::splitmix64(state)));
        id = buf;
      } while (sessions_.count(id));
      s->seed = ctx.config->rng_seed ^ detail::fnv1a64(id);
      s->state.id = id;
      s->state.conversation.id = id;
      s->state.rng = RngState(s->seed);
      s->created_ms = s->updated_ms = clock_();
      sessions_[id] = s;
    }
    store_->append(json{{"type", "session"}, {"session", id}, {"seed", s->seed}, {"ts_ms", s->created_ms}},
                   s->created_ms);
    return s;
  }

  // Returns an error message, or nullopt when the body matches the schema.
  static std::optional<std::string> validate_chat_request(const json& body) {
    if (!body.is_object()) return "request body must be a JSON object";
    if (!body.contains("model") || !body["model"].is_string()) return "'model' must be a string";
    if (!body.contains("messages") || !body["messages"].is_array() || body["messages"].empty())
      return "'messages' must be a non-empty array";
    for (const auto& m : body["messages"]) {
      if (!m.is_object() || !m.contains("role") || !m["role"].is_string() || !parse_role(m["role"].get<std::string>()))
        return "each message needs a role of system, user or assistant";
      if (!m.contains("content") || !m["content"].is_string()) return "each message needs string content";
    }
    if (body.contains("temperature") && !body["temperature"].is_number()) return "'temperature' must be a number";
    if (body.contains("max_tokens") && (!body["max_tokens"].is_number_integer() || body["max_tokens"].get<long long>() < 1))
      return "'max_tokens' must be a positive integer";
    if (body["messages"].back()["role"].get<std::string>() != "user")
      return "the last message must have role 'user'";
    return std::nullopt;
  }

  void handle_chat(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return send_error(res, 400, std::string("invalid JSON: ") + e.what());
    }
    if (auto err = validate_chat_request(body)) return send_error(res, 400, *err);

    auto ctx = context();
    std::shared_ptr<Session> session;
    if (req.has_header(kSessionHeader)) {
      session = find_session(req.get_header_value(kSessionHeader));
      if (!session) return send_error(res, 404, "unknown session");
    }

    struct InFlight {
      std::atomic<int>& n;
      ~InFlight() { n.fetch_sub(1); }
    };
    if (in_flight_.fetch_add(1) >= ctx->config->concurrent_session_limit) {
      in_flight_.fetch_sub(1);
      return send_error(res, 429, "concurrent session limit reached");
    }
    InFlight guard{in_flight_};
    if (!session) session = create_session(*ctx);

    // Per-request generation parameters override the configured defaults.
    EngineContext turn_ctx = *ctx;
    if (body.contains("temperature") || body.contains("max_tokens")) {
      EngineConfig cfg = *ctx->config;
      if (body.contains("temperature")) cfg.generation.temperature = body["temperature"].get<double>();
      if (body.contains("max_tokens")) cfg.generation.max_tokens = body["max_tokens"].get<int>();
      turn_ctx.config = std::make_shared<const EngineConfig>(std::move(cfg));
    }
    turn_ctx.clock = clock_;
    const std::string human_text = body["messages"].back()["content"].get<std::string>();

    std::lock_guard turn_lock(session->turn_mu);
    ensure_clients(*session, turn_ctx);
    EvaluationRecord record;
    try {
      record = session_turn(session->state, human_text, turn_ctx, {session->base.get(), session->observer.get()});
    } catch (const TurnError& e) {
      res.set_header(kSessionHeader, session->state.id);
      return send_error(res, 502, e.what());
    } catch (const PreconditionError& e) {
      return send_error(res, 400, e.what());
    }
    const auto& turns = session->state.conversation.turns;
    const Turn& human = turns[turns.size() - 2];
    const Turn& agent = turns.back();
    const std::int64_t now = clock_();
    json rec_json = to_json(record);
    store_->append(json{{"type", "turn"},
                        {"session", session->state.id},
                        {"human", to_json(human)},
                        {"agent", to_json(agent)},
                        {"record", rec_json},
                        {"ts_ms", now}},
                   now);
    if (after_persist_) after_persist_();
    session->records.push_back(record);
    session->updated_ms = now;
    session->events.publish("record", rec_json.dump());

    const std::size_t completion_tokens = count_completion_tokens(record.accepted_text, turn_ctx.extractors.tokenizer);
    json out = {{"id", "chatcmpl-" + session->state.id + "-" + std::to_string(record.turn)},
                {"choices", json::array({json{{"index", 0},
                                              {"message", {{"role", "assistant"}, {"content", record.accepted_text}}}}})},
                {"usage", {{"completion_tokens", completion_tokens}}}};
    res.set_header(kSessionHeader, session->state.id);
    res.set_header(kTraceHeader, session->state.id + ":" + std::to_string(record.turn));
    res.set_content(out.dump(), "application/json");
  }

  void handle_trace(const httplib::Request& req, httplib::Response& res) {
    auto session = find_session(req.matches[1]);
    if (!session) return send_error(res, 404, "unknown session");
    std::vector<EvaluationRecord> records;
    {
      std::lock_guard lock(session->turn_mu);
      records = session->records;
    }
    auto parse_index = [&](const char* key, std::size_t fallback) -> std::optional<std::size_t> {
      if (!req.has_param(key)) return fallback;
      const auto v = req.get_param_value(key);
      try {
        std::size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size() || x < 0) return std::nullopt;
        return static_cast<std::size_t>(x);
      } catch (...) {
        return std::nullopt;
      }
    };
    auto from = parse_index("from", 0);
    auto to = parse_index("to", records.empty() ? 0 : records.size() - 1);
    if (!from || !to) return send_error(res, 400, "from/to must be nonnegative integers");
    json arr = json::array();
    for (std::size_t i = *from; i <= *to && i < records.size(); ++i) arr.push_back(to_json(records[i]));
    res.set_content(arr.dump(), "application/json");
  }

  void handle_events(const httplib::Request& req, httplib::Response& res) {
    auto session = find_session(req.matches[1]);
    if (!session) return send_error(res, 404, "unknown session");
    std::uint64_t after = 0;
    std::string last = req.get_header_value("Last-Event-ID");
    if (last.empty() && req.has_param("last_event_id")) last = req.get_param_value("last_event_id");
    if (!last.empty()) {
      try {
        after = std::stoull(last);
      } catch (...) {
        return send_error(res, 400, "invalid Last-Event-ID");
      }
    }
    const bool follow = !(req.has_param("follow") && req.get_param_value("follow") == "false");
    auto cursor = std::make_shared<std::uint64_t>(after);
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream", [this, session, cursor, follow](std::size_t, httplib::DataSink& sink) {
          auto batch = session->events.since(*cursor, follow ? options_.stream_poll : std::chrono::milliseconds(0));
          for (const auto& e : batch) {
            auto text = format_sse(e);
            if (!sink.write(text.data(), text.size())) return false;
            *cursor = e.id;
          }
          if (!follow) {
            sink.done();
            return true;
          }
          if (batch.empty()) {
            static constexpr char kKeepAlive[] = ": keep-alive\n\n";
            if (!sink.is_writable() || !sink.write(kKeepAlive, sizeof kKeepAlive - 1)) return false;
          }
          return !stopping_.load();
        });
  }

  json effective_config_json(const EngineContext& ctx) const {
    return json{{"config", to_json(*ctx.config)}, {"rules", rules_to_json(ctx.rules)["rules"]}};
  }

  void handle_patch_config(const httplib::Request& req, httplib::Response& res) {
    json patch;
    try {
      patch = req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::parse_error& e) {
      return send_error(res, 400, std::string("invalid JSON: ") + e.what());
    }
    if (!patch.is_object()) return send_error(res, 422, "config patch must be an object");

    std::lock_guard patch_lock(patch_mu_);
    auto current = context();
    EngineConfig cfg;
    std::vector<OverlayRule> rules(current->rules.begin(), current->rules.end());
    try {
      json rule_patches = patch.contains("rules") ? patch["rules"] : json(nullptr);
      patch.erase("rules");
      cfg = merge_config_patch(*current->config, patch);
      if (!rule_patches.is_null()) {
        if (!rule_patches.is_array()) throw RuleError("", "'rules' patch must be an array");
        for (const auto& rp : rule_patches) {
          if (!rp.is_object() || !rp.contains("id") || !rp["id"].is_string())
            throw RuleError("", "each rule patch needs an id");
          auto id = rp["id"].get<std::string>();
          auto it = std::find_if(rules.begin(), rules.end(), [&](const OverlayRule& r) { return r.id == id; });
          if (it == rules.end()) throw RuleError(id, "unknown rule");
          json merged = rule_to_json(*it);
          merged.merge_patch(rp);
          *it = rule_from_json(merged);
        }
      }
    } catch (const Error& e) {
      return send_error(res, 422, e.what());
    }
    std::optional<RuleSet> validated;
    try {
      validated = validate_rules(std::move(rules));
    } catch (const Error& e) {
      return send_error(res, 422, e.what());
    }
    if (cfg == *current->config && *validated == current->rules) {
      res.set_content(effective_config_json(*current).dump(), "application/json");
      return;
    }
    std::shared_ptr<const EngineContext> next;
    try {
      next = std::make_shared<const EngineContext>(make_context(cfg, *validated));
    } catch (const Error& e) {
      return send_error(res, 422, e.what());
    }
    json effective = effective_config_json(*next);
    const std::int64_t now = clock_();
    store_->append(json{{"type", "config"},
                        {"config", effective["config"]},
                        {"rules", rules_to_json(next->rules)},
                        {"ts_ms", now}},
                   now);
    {
      std::lock_guard lock(context_mu_);
      context_ = next;
    }
    {
      std::lock_guard lock(sessions_mu_);
      for (auto& [_, s] : sessions_) s->events.publish("config", effective.dump());
    }
    res.set_content(effective.dump(), "application/json");
  }

  void install_routes() {
    server_.new_task_queue = [] { return new httplib::ThreadPool(72); };
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server_.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
      if (authorized(req, res)) handle_chat(req, res);
    });
    server_.Get(R"(/v1/sessions/([^/]+)/trace)", [this](const httplib::Request& req, httplib::Response& res) {
      if (authorized(req, res)) handle_trace(req, res);
    });
    server_.Get(R"(/v1/sessions/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      if (authorized(req, res)) handle_events(req, res);
    });
    server_.Get("/v1/config", [this](const httplib::Request& req, httplib::Response& res) {
      if (authorized(req, res)) res.set_content(effective_config_json(*context()).dump(), "application/json");
    });
    server_.Patch("/v1/config", [this](const httplib::Request& req, httplib::Response& res) {
      if (authorized(req, res)) handle_patch_config(req, res);
    });
  }

  ServiceOptions options_;
  Clock clock_;
  std::unique_ptr<JsonlStore> store_;
  httplib::Server server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
  std::atomic<int> in_flight_{0};

  mutable std::mutex context_mu_;
  std::shared_ptr<const EngineContext> context_;
  std::mutex patch_mu_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t sessions_created_ = 0;

  ClientFactory factory_;
  std::function<void()> after_persist_;
  std::vector<std::string> replay_warnings_;
};

}  // namespace gobs
