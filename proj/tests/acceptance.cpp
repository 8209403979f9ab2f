// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

#include "gobs/gobs.hpp"
#include "oracles.hpp"

using namespace gobs;
namespace fs = std::filesystem;

namespace {

struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok && failures.size() == 5) failures.push_back("...");
  }
};

using Clk = std::chrono::steady_clock;

int g_failed = 0;

void criterion(const std::string& name, double budget_s, const std::function<void(Check&)>& body) {
  Check c;
  auto t0 = Clk::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.failures.push_back(std::string("exception: ") + e.what());
  }
  double secs = std::chrono::duration<double>(Clk::now() - t0).count();
  if (budget_s > 0 && secs >= budget_s)
    c.failures.push_back("runtime " + std::to_string(secs) + " s exceeds " + std::to_string(budget_s) + " s");
  const bool ok = c.failures.empty();
  std::printf("%s  %s  (%.3f s)\n", ok ? "PASS" : "FAIL", name.c_str(), secs);
  for (const auto& f : c.failures) std::printf("      %s\n", f.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failed;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("gobs_acceptance_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

constexpr std::string_view kBrevityRulesFile = R"({"rules": [{"id": "brevity", "feature": "brevity",
  "comparator": "at_most", "threshold": 40, "rigidity": 1.0, "urgent_threshold": 0.5, "priority": 1}]})";

std::size_t whitespace_words(const std::string& s) {
  std::istringstream in(s);
  std::size_t n = 0;
  for (std::string w; in >> w;) ++n;
  return n;
}

// 60 words, or 20 once a forced directive is present in the prompt.
std::string verbose_then_concise(std::span<const ChatMessage> m, const ChatParams&) {
  for (const auto& x : m)
    if (x.role == Role::system && x.content.starts_with(kForcedLead)) return oracle::words(20);
  return oracle::words(60);
}

// --- criteria ---------------------------------------------------------------

void tone_oracle(Check& c) {
  std::mt19937_64 gen(20240611);
  std::uniform_real_distribution<double> u(-1.0, 1.0), w01(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double h = u(gen);
    std::vector<double> s(1 + gen() % 6);
    for (auto& v : s) v = u(gen);
    ToneWeights w;
    w.holistic = w01(gen);
    std::vector<double> wi(s.size());
    for (auto& v : wi) v = w01(gen) * (1.0 - w.holistic);
    w.sentence = wi;
    const double got = combine_tone(h, s, w);
    c.expect(std::abs(got - oracle::tone(h, s, w.holistic, wi)) <= 1e-9, "draw " + std::to_string(i) + " differs");
    c.expect(got >= -1.0 - 1e-12 && got <= 1.0 + 1e-12, "draw " + std::to_string(i) + " outside [-1, 1]");
  }

  // Stored C on extracted texts under default weights.
  EngineConfig config;
  auto ctx = EngineContext::make(config);
  const std::vector<std::string> vocab{"good", "great", "happy", "love", "bad", "awful", "sad", "terrible",
                                       "the", "day", "was", "we", "and", "nice", "hate", "fine"};
  for (int i = 0; i < 1000; ++i) {
    std::string text;
    for (int k = 0, n = 1 + static_cast<int>(gen() % 14); k < n; ++k) {
      text += vocab[gen() % vocab.size()];
      text += gen() % 4 == 0 ? ". " : " ";
    }
    auto f = extract_all(text, std::nullopt, config, ctx.extractors);
    std::vector<double> w(f.tone.sentence_scores.size(), 0.5);
    double direct = oracle::tone(f.tone.holistic, f.tone.sentence_scores, 0.5, w);
    c.expect(std::abs(f.tone.combined - direct) <= 1e-9, "stored C differs for '" + text + "'");
    c.expect(f.tone.combined >= -1.0 && f.tone.combined <= 1.0, "stored C outside [-1, 1]");
  }

  // Acceptable band [-0.5, 1.0] exactly, boundaries included.
  const OverlayRule* tone = ctx.rules.find("tone");
  c.expect(tone && tone->range == Range{-0.5, 1.0}, "default tone band is not [-0.5, 1.0]");
  if (!tone) return;
  c.expect(rule_satisfied(*tone, -0.5) && rule_satisfied(*tone, 1.0), "band endpoints rejected");
  c.expect(!rule_satisfied(*tone, std::nextafter(-0.5, -1.0)), "value just below -0.5 accepted");
  c.expect(!rule_satisfied(*tone, std::nextafter(1.0, 2.0)), "value just above 1.0 accepted");
  for (int i = 0; i < 1000; ++i) {
    double v = u(gen);
    c.expect(rule_satisfied(*tone, v) == (v >= -0.5 && v <= 1.0), "band check mismatch");
  }
}

void regeneration_budget(Check& c) {
  auto ctx = EngineContext::make(EngineConfig{}, load_rules(kBrevityRulesFile));
  ctx.clock = manual_clock();
  CallbackChatClient base([](std::span<const ChatMessage>, const ChatParams&) { return oracle::words(60); });
  std::vector<std::string> lines;
  for (int i = 0; i < 100; ++i) lines.push_back("turn " + std::to_string(i));
  ScriptedInput in(lines);
  auto s = run_session(in, ctx, {&base, nullptr}, 42);
  c.expect(s.records.size() == 100, "expected 100 records, got " + std::to_string(s.records.size()));
  c.expect(s.failures.empty(), "unexpected turn failures");
  for (const auto& r : s.records) {
    c.expect(r.candidates.size() == 4, "turn " + std::to_string(r.turn) + " has " +
                                           std::to_string(r.candidates.size()) + " candidates");
    c.expect(!r.decisions.empty() && r.decisions.back().kind == DecisionKind::accept && r.budget_exhausted(),
             "turn " + std::to_string(r.turn) + " did not end accept with budget_exhausted");
    c.expect(r.forced_count == 3, "turn " + std::to_string(r.turn) + " forced_count != 3");
  }
}

void guardrail_effectiveness(Check& c) {
  std::string jsonl;
  for (int k = 0; k < 50; ++k) {
    const std::string id = "conv" + std::to_string(k);
    for (int t = 0; t < 10; ++t) {
      jsonl += json{{"conv", id}, {"turn", 2 * t}, {"speaker", "human"}, {"text", "human line " + std::to_string(t)}}.dump() + "\n";
      jsonl += json{{"conv", id}, {"turn", 2 * t + 1}, {"speaker", "agent"}, {"text", "ok"}}.dump() + "\n";
    }
  }
  auto corpus = parse_corpus(jsonl);
  auto ctx = EngineContext::make(EngineConfig{}, load_rules(kBrevityRulesFile));
  ctx.clock = manual_clock();
  auto out = scratch("guardrail");
  auto factory = [](const Conversation&) -> std::unique_ptr<ChatClient> {
    return std::make_unique<CallbackChatClient>(verbose_then_concise);
  };
  auto res = run_eval(corpus, ctx, factory, GatingMode::observer, out / "traces.jsonl");
  write_report(render_report(res.report_input()), out);
  c.expect(res.failures.empty(), "turn failures during eval");
  c.expect(res.generated.size() == 50, "expected 50 conversations");

  std::size_t accepted = 0;
  for (const auto& conv : res.generated)
    for (const auto& t : conv.turns)
      if (t.speaker == Speaker::agent) {
        ++accepted;
        c.expect(whitespace_words(t.text) <= 40, "accepted reply over 40 tokens in " + conv.id);
      }
  c.expect(accepted == 500, "expected 500 accepted replies, got " + std::to_string(accepted));

  // Independent recomputation from the persisted traces.
  std::ifstream traces(out / "traces.jsonl");
  std::size_t turns = 0, implicit = 0, flagged = 0, forced = 0, regenerations = 0, exhausted = 0;
  for (std::string line; std::getline(traces, line);) {
    const json rec = json::parse(line).at("record");
    ++turns;
    const auto& decisions = rec.at("decisions");
    if (decisions.back().at("kind") == "accept_with_implicit") ++implicit;
    const int fc = rec.at("forced_count").get<int>();
    if (fc > 0) ++flagged;
    forced += static_cast<std::size_t>(fc);
    regenerations += rec.at("candidates").size() - 1;
    if (decisions.back().at("budget_exhausted").get<bool>()) ++exhausted;
  }
  c.expect(turns == 500, "traces hold " + std::to_string(turns) + " records");
  c.expect(flagged > 0 && forced == flagged, "mean forced_count per flagged turn is not 1");

  std::map<std::string, std::string> csv;
  std::ifstream report(out / "report.csv");
  for (std::string line; std::getline(report, line);) {
    auto a = line.find(','), b = line.rfind(',');
    if (line.compare(0, a, "triggers") == 0) csv[line.substr(a + 1, b - a - 1)] = line.substr(b + 1);
  }
  auto rate = [](std::size_t num, std::size_t den) { return detail::fmt(den ? double(num) / double(den) : 0.0); };
  const std::map<std::string, std::string> expected{
      {"turns", std::to_string(turns)},
      {"implicit_turns", std::to_string(implicit)},
      {"implicit_rate", rate(implicit, turns)},
      {"forced_turns", std::to_string(flagged)},
      {"forced_rate", rate(flagged, turns)},
      {"forced_per_forced_turn", rate(forced, flagged)},
      {"total_regenerations", std::to_string(regenerations)},
      {"budget_exhausted", std::to_string(exhausted)}};
  c.expect(csv == expected, "report trigger rows differ from the trace recomputation");
  c.expect(csv["forced_per_forced_turn"] == "1.000000", "report forced per flagged turn != 1");
  fs::remove_all(out);
}

void statistics_oracles(Check& c) {
  std::mt19937_64 gen(99);
  for (int i = 0; i < 50; ++i) {
    const std::size_t n = 1 + gen() % 10;
    std::vector<double> x(n), y(n);
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = static_cast<double>(gen() % 7);
      y[k] = static_cast<double>(gen() % 7);
    }
    auto w = stats::wilcoxon_signed_rank(x, y);
    auto o = oracle::signed_rank_enumerate(x, y);
    c.expect(w.exact, "fixture " + std::to_string(i) + " not on the exact path");
    c.expect(std::abs(w.p - o.p) <= 1e-12, "fixture " + std::to_string(i) + " p differs from enumeration");
  }
  auto h = stats::holm_correct(std::vector<double>{0.01, 0.04});
  c.expect(std::abs(h[0] - 0.02) <= 1e-15 && std::abs(h[1] - 0.04) <= 1e-15, "Holm (0.01, 0.04) != (0.02, 0.04)");
  c.expect(stats::brown_forsythe({{1, 2, 3}, {1, 2, 3}}).f == 0.0, "Brown-Forsythe F' != 0 on identical groups");
  c.expect(stats::cohens_kappa({{7, 0, 0}, {0, 3, 0}, {0, 0, 5}}) == 1.0, "kappa != 1 on perfect agreement");
  c.expect(std::abs(stats::cohens_kappa({{4, 6}, {6, 9}})) <= 1e-12, "kappa != 0 on an independence table");
  c.expect(std::abs(stats::cohens_kappa({{10, 10}, {10, 10}})) <= 1e-12, "kappa != 0 on a uniform table");
}

void human_likeness_bounds(Check& c) {
  std::mt19937_64 gen(5);
  for (int i = 0; i < 5000; ++i) {
    std::vector<double> a(1 + gen() % 10), b(1 + gen() % 10);
    for (auto& v : a) v = 1 + static_cast<double>(gen() % 5);
    for (auto& v : b) v = 1 + static_cast<double>(gen() % 5);
    double v = human_likeness("c", Criterion::brevity, a, b).value;
    c.expect(v >= 0.0 && v <= 4.0, "value outside [0, 4]");
    c.expect(human_likeness("c", Criterion::brevity, a, a).value == 0.0, "identical lists not 0");
  }
  c.expect(human_likeness("c", Criterion::tone, {5, 5, 5}, {1, 1}).value == 4.0, "(5s vs 1s) != 4");
}

std::string record_stream() {
  EngineConfig config;
  config.forced_feedback_probability = 0.5;
  config.rng_seed = 77;
  auto ctx = EngineContext::make(config);
  ctx.clock = manual_clock();
  std::string out;
  for (int k = 0; k < 5; ++k) {
    CallbackChatClient base([k](std::span<const ChatMessage> m, const ChatParams&) {
      std::string s = "We met Anna in Paris and it was awful. ";
      return s + oracle::words(8 * ((m.size() + k) % 9), "really");
    });
    std::vector<std::string> lines;
    for (int i = 0; i < 8; ++i) lines.push_back("How was the trip, part " + std::to_string(i) + "?");
    ScriptedInput in(lines);
    auto s = run_session(in, ctx, {&base, nullptr}, conversation_seed(config.rng_seed, std::to_string(k)));
    for (const auto& r : s.records) out += to_json(r).dump() + "\n";
  }
  return out;
}

// Runs one turn through the service; the child variant dies inside the
// after-persist hook, before the reply is written.
std::string service_turn(const fs::path& store, bool die_after_persist) {
  ServiceOptions o;
  o.store_dir = store.string();
  ObserverService svc(EngineConfig{}, load_rules(kBrevityRulesFile), o, manual_clock(1'700'000'000'000));
  svc.set_client_factory([](const ProviderDescriptor&) -> std::unique_ptr<ChatClient> {
    return std::make_unique<CallbackChatClient>(verbose_then_concise);
  });
  if (die_after_persist) svc.set_after_persist_hook([] { ::_exit(17); });
  int port = svc.start();
  httplib::Client cli("127.0.0.1", port);
  json body{{"model", "m"}, {"messages", json::array({json{{"role", "user"}, {"content", "hello there"}}})}};
  auto res = cli.Post("/v1/chat/completions", body.dump(), "application/json");
  std::string sid = res ? res->get_header_value(kSessionHeader) : "";
  if (!res || res->status != 200) return "";
  return cli.Get("/v1/sessions/" + sid + "/trace")->body;
}

void determinism_and_durability(Check& c) {
  const std::string first = record_stream();
  c.expect(!first.empty(), "empty record stream");
  c.expect(record_stream() == first, "run 2 differs from run 1");
  c.expect(record_stream() == first, "run 3 differs from run 1");

  // Persisted stores of three service runs are byte-identical too.
  std::vector<std::string> stores;
  for (int i = 0; i < 3; ++i) {
    auto dir = scratch("det" + std::to_string(i));
    service_turn(dir, false);
    std::string all;
    for (const auto& e : fs::directory_iterator(dir)) {
      std::ifstream in(e.path());
      all += e.path().filename().string() + "\n" + std::string(std::istreambuf_iterator<char>(in), {});
    }
    stores.push_back(all);
    fs::remove_all(dir);
  }
  c.expect(!stores[0].empty() && stores[0] == stores[1] && stores[1] == stores[2], "persisted stores differ");

  // Kill between persistence and response.
  auto reference_dir = scratch("ref");
  const std::string reference_trace = service_turn(reference_dir, false);
  fs::remove_all(reference_dir);
  auto dir = scratch("kill");
  std::fflush(stdout);
  pid_t pid = ::fork();
  if (pid == 0) {
    service_turn(dir, true);
    ::_exit(0);  // reached only if the hook never fired
  }
  int status = 0;
  ::waitpid(pid, &status, 0);
  c.expect(WIFEXITED(status) && WEXITSTATUS(status) == 17, "child did not die inside the after-persist hook");

  auto replay = JsonlStore(dir).replay();
  c.expect(replay.warnings.empty(), "replay reported warnings");
  c.expect(replay.sessions.size() == 1, "replay found " + std::to_string(replay.sessions.size()) + " sessions");
  if (replay.sessions.size() == 1) {
    const auto& ps = replay.sessions.begin()->second;
    c.expect(ps.records.size() == 1, "persisted record lost");
    c.expect(ps.state.conversation.turns.size() == 2, "conversation state not reconstructed");
    json arr = json::array();
    for (const auto& r : ps.records) arr.push_back(to_json(r));
    c.expect(arr.dump() == reference_trace, "replayed record differs from an uninterrupted run");

    ObserverService restarted(EngineConfig{}, load_rules(kBrevityRulesFile), ServiceOptions{dir.string()});
    c.expect(restarted.session_count() == 1, "restarted service did not restore the session");
  }
  fs::remove_all(dir);
}

void wire_conformance(Check& c) {
  const std::set<std::string> request_keys{"model", "messages", "temperature", "max_tokens"};
  std::vector<std::string> upstream_errors;
  httplib::Server upstream;
  upstream.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    json b = json::parse(req.body);
    std::set<std::string> k;
    for (auto it = b.begin(); it != b.end(); ++it) k.insert(it.key());
    if (k != request_keys) upstream_errors.push_back("request keys differ");
    if (!b["model"].is_string() || !b["temperature"].is_number() || !b["max_tokens"].is_number_integer())
      upstream_errors.push_back("request field types differ");
    for (const auto& m : b["messages"]) {
      if (m.size() != 2 || !m.contains("role") || !m.contains("content") || !m["content"].is_string())
        upstream_errors.push_back("message shape differs");
      auto role = m.value("role", "");
      if (role != "system" && role != "user" && role != "assistant") upstream_errors.push_back("bad role");
    }
    if (b["messages"].empty() || b["messages"][0]["role"] != "system") upstream_errors.push_back("no system prompt");
    json reply{{"id", "up-1"},
               {"object", "chat.completion"},
               {"choices", json::array({json{{"index", 0},
                                             {"message", {{"role", "assistant"}, {"content", "Nice to meet you!"}}},
                                             {"finish_reason", "stop"}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  int up_port = upstream.bind_to_any_port("127.0.0.1");
  std::thread up_thread([&] { upstream.listen_after_bind(); });
  upstream.wait_until_ready();

  EngineConfig config;
  config.base_provider.kind = ProviderKind::http_chat;
  config.base_provider.url = "http://127.0.0.1:" + std::to_string(up_port) + "/v1/chat/completions";
  config.base_provider.max_retries = 0;
  ObserverService svc(config, std::nullopt);
  int port = svc.start();
  httplib::Client cli("127.0.0.1", port);
  json body{{"model", "anything"},
            {"messages", json::array({json{{"role", "system"}, {"content", "ignored"}},
                                      json{{"role", "user"}, {"content", "Hi! I'm Sam."}}})},
            {"temperature", 0.3},
            {"max_tokens", 64}};
  auto res = cli.Post("/v1/chat/completions", body.dump(), "application/json");
  c.expect(res && res->status == 200, "service did not answer 200");
  if (res && res->status == 200) {
    json r = json::parse(res->body);
    const std::string sid = res->get_header_value(kSessionHeader);
    json expected{{"id", "chatcmpl-" + sid + "-1"},
                  {"choices", json::array({json{{"index", 0},
                                                {"message", {{"role", "assistant"}, {"content", "Nice to meet you!"}}}}})},
                  {"usage", {{"completion_tokens", 4}}}};
    c.expect(r == expected, "response body differs: " + r.dump());
    c.expect(res->get_header_value("Content-Type") == "application/json", "response content type");
    c.expect(res->get_header_value(kTraceHeader) == sid + ":1", "trace id header");
  }
  svc.stop();
  upstream.stop();
  up_thread.join();
  for (const auto& e : upstream_errors) c.expect(false, "upstream saw: " + e);

  // The primary suite builds without any secondary component.
  for (const auto& e : fs::directory_iterator(GOBS_BINARY_DIR))
    c.expect(e.path().filename().string().find("inspector") == std::string::npos,
             "secondary component present in the build tree");
}

}  // namespace

int main() {
  criterion("tone equation oracle", 1.0, tone_oracle);
  criterion("regeneration budget: always-verbose base, rigid brevity", 5.0, regeneration_budget);
  criterion("guardrail effectiveness: 50 conversations x 10 turns", 10.0, guardrail_effectiveness);
  criterion("statistics oracles", 5.0, statistics_oracles);
  criterion("human-likeness bounds", 0.0, human_likeness_bounds);
  criterion("determinism and durability", 0.0, determinism_and_durability);
  criterion("wire conformance", 0.0, wire_conformance);
  std::printf("%s: %d criterion(s) failed\n", g_failed ? "FAIL" : "PASS", g_failed);
  return g_failed ? 1 : 0;
}
