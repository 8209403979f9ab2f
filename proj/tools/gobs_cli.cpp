#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "gobs/gobs.hpp"

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kUpstream = 3 };

struct UsageError : gobs::Error {
  using gobs::Error::Error;
};

gobs::EngineConfig read_config(const std::string& path) {
  if (path.empty()) return gobs::EngineConfig{};
  return gobs::load_config(gobs::detail::read_file(path));
}

std::optional<gobs::RuleSet> read_rules(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return gobs::load_rules(gobs::detail::read_file(path));
}

// OBSERVER_API_KEY_VAR names the variable that holds the upstream credential.
void apply_credential_env(gobs::EngineConfig& c) {
  if (const char* var = std::getenv("OBSERVER_API_KEY_VAR"); var && *var) {
    c.base_provider.credential_env = var;
    if (c.observer_provider) c.observer_provider->credential_env = var;
  }
}

std::pair<std::string, int> split_addr(const std::string& addr) {
  auto colon = addr.rfind(':');
  if (colon == std::string::npos) throw UsageError("--addr must be host:port");
  int port = 0;
  try {
    port = std::stoi(addr.substr(colon + 1));
  } catch (const std::exception&) {
    throw UsageError("--addr has an invalid port");
  }
  if (port <= 0 || port > 65535) throw UsageError("--addr has an invalid port");
  return {addr.substr(0, colon), port};
}

int cmd_chat(const std::string& config_path, const std::string& rules_path, std::optional<std::uint64_t> seed,
             const std::string& base_url, bool trace) {
  auto config = read_config(config_path);
  apply_credential_env(config);
  if (!base_url.empty()) {
    config.base_provider.kind = gobs::ProviderKind::http_chat;
    config.base_provider.url = base_url;
  }
  if (seed) config.rng_seed = *seed;
  gobs::validate_config(config);
  auto ctx = gobs::EngineContext::make(config, read_rules(rules_path));
  auto base = gobs::make_chat_client(ctx.config->base_provider);
  std::unique_ptr<gobs::ChatClient> observer;
  if (ctx.config->observer_provider) observer = gobs::make_chat_client(*ctx.config->observer_provider);

  gobs::SessionState s;
  s.id = "cli";
  s.conversation.id = "cli";
  s.rng = gobs::RngState(ctx.config->rng_seed);
  int rc = kOk;
  std::string line;
  while (std::cout << "> " << std::flush, std::getline(std::cin, line)) {
    if (gobs::detail::trim(line).empty()) continue;
    try {
      auto rec = gobs::session_turn(s, line, ctx, {base.get(), observer.get()});
      std::cout << rec.accepted_text << "\n";
      if (trace) std::cerr << gobs::to_json(rec).dump() << "\n";
      for (const auto& w : rec.warnings) std::cerr << "warning: " << w << "\n";
    } catch (const gobs::TurnError& e) {
      std::cerr << "error: " << e.what() << "\n";
      rc = kUpstream;
    }
  }
  return rc;
}

gobs::ObserverService* g_service = nullptr;

int cmd_serve(const std::string& addr, const std::string& config_path, const std::string& rules_path,
              const std::string& store_dir, const std::string& token_env) {
  auto [host, port] = split_addr(addr);
  auto config = read_config(config_path);
  apply_credential_env(config);
  gobs::validate_config(config);
  gobs::ServiceOptions opts;
  opts.store_dir = store_dir;
  if (!token_env.empty()) {
    const char* tok = std::getenv(token_env.c_str());
    if (!tok || !*tok) throw UsageError("environment variable " + token_env + " is empty");
    opts.bearer_token = tok;
  }
  gobs::ObserverService service(std::move(config), read_rules(rules_path), opts);
  for (const auto& w : service.replay_warnings()) std::cerr << "replay warning: " << w << "\n";
  g_service = &service;
  std::signal(SIGINT, [](int) {
    if (g_service) g_service->http().stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_service) g_service->http().stop();
  });
  std::cerr << "listening on " << host << ":" << port << "\n";
  bool ok = service.listen(host, port);
  g_service = nullptr;
  if (!ok) {
    std::cerr << "error: cannot listen on " << addr << "\n";
    return kUsage;
  }
  return kOk;
}

int cmd_eval(const std::string& corpus_path, const std::string& out_dir, const std::string& mode_name,
             const std::string& config_path, const std::string& rules_path, const std::string& base_url) {
  auto config = read_config(config_path);
  apply_credential_env(config);
  if (!base_url.empty()) {
    config.base_provider.kind = gobs::ProviderKind::http_chat;
    config.base_provider.url = base_url;
  }
  gobs::validate_config(config);
  auto corpus = gobs::ingest_corpus(corpus_path);
  auto ctx = gobs::EngineContext::make(config, read_rules(rules_path));
  auto mode = mode_name == "base" ? gobs::GatingMode::base : gobs::GatingMode::observer;
  auto provider = ctx.config->base_provider;
  // Without a configured base model the corpus's own agent replies are replayed.
  const bool offline = provider.kind == gobs::ProviderKind::scripted && provider.responses.empty();
  auto factory = [&](const gobs::Conversation& source) -> std::unique_ptr<gobs::ChatClient> {
    if (offline) return std::make_unique<gobs::RecordedReplyClient>(source);
    return gobs::make_chat_client(provider);
  };
  auto result = gobs::run_eval(corpus, ctx, factory, mode, std::filesystem::path(out_dir) / "traces.jsonl");
  gobs::write_report(gobs::render_report(result.report_input()), out_dir);
  for (const auto& f : result.failures)
    std::cerr << "error: conversation " << f.conversation_id << " input " << f.input_index << ": " << f.message
              << "\n";
  std::cout << "wrote " << (std::filesystem::path(out_dir) / "report.md").string() << "\n";
  return result.failures.empty() ? kOk : kUpstream;
}

int cmd_score(const std::string& corpus_path, const std::string& annotations_path, const std::string& out_dir,
              const std::string& config_path) {
  auto config = read_config(config_path);
  gobs::validate_config(config);
  auto corpus = gobs::ingest_corpus(corpus_path);
  if (!annotations_path.empty()) corpus = gobs::ingest_corpus(annotations_path, std::move(corpus));
  auto extractors = gobs::Extractors::local(config);
  auto result = gobs::score_corpus(corpus, config, extractors);
  auto report = gobs::render_report(result.report_input(corpus.conversations.size()));
  if (!out_dir.empty()) gobs::write_report(report, out_dir);
  std::cout << report.markdown;
  return kOk;
}

std::vector<double> numbers(const gobs::json& j, const std::string& what) {
  if (!j.is_array()) throw gobs::DataError(0, what + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& v : j) {
    if (!v.is_number()) throw gobs::DataError(0, what + " must be an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

// Input: {"pairs":[{"name","x","y"}], "groups":[{"name","values"}], "tables":[{"name","table"}]}
int cmd_stats(const std::string& in_path, const std::vector<std::string>& tests, bool holm) {
  using gobs::json;
  std::set<std::string> want(tests.begin(), tests.end());
  for (const auto& t : want)
    if (t != "wilcoxon" && t != "t" && t != "bf" && t != "kappa") throw UsageError("unknown test '" + t + "'");
  json in;
  try {
    in = json::parse(gobs::detail::read_file(in_path));
  } catch (const json::parse_error& e) {
    throw gobs::DataError(0, std::string("malformed JSON: ") + e.what());
  }
  json out = json::object();
  std::vector<double> wp, tp;
  if (in.contains("pairs")) {
    for (const auto& p : in.at("pairs")) {
      auto name = p.value("name", std::string("pair"));
      auto x = numbers(p.at("x"), name + ".x");
      auto y = numbers(p.at("y"), name + ".y");
      json r = json::object();
      if (want.count("wilcoxon")) {
        auto w = gobs::stats::wilcoxon_signed_rank(x, y);
        r["wilcoxon"] = {{"w_plus", w.w_plus}, {"w_minus", w.w_minus}, {"n", w.n},
                         {"z", w.z},           {"p", w.p},             {"exact", w.exact}};
        wp.push_back(w.p);
      }
      if (want.count("t")) {
        try {
          auto t = gobs::stats::paired_t(x, y);
          r["t"] = {{"t", t.t}, {"df", t.df}, {"p", t.p}};
          tp.push_back(t.p);
        } catch (const gobs::PreconditionError& e) {
          r["t"] = {{"error", e.what()}};
        }
      }
      out["pairs"][name] = r;
    }
    if (holm) {
      std::size_t i = 0, k = 0;
      auto wa = gobs::stats::holm_correct(wp);
      auto ta = gobs::stats::holm_correct(tp);
      for (auto& [name, r] : out["pairs"].items()) {
        if (r.contains("wilcoxon")) r["wilcoxon"]["p_holm"] = wa[i++];
        if (r.contains("t") && r["t"].contains("p")) r["t"]["p_holm"] = ta[k++];
      }
    }
  }
  if (want.count("bf") && in.contains("groups")) {
    std::vector<std::vector<double>> groups;
    for (const auto& g : in.at("groups")) groups.push_back(numbers(g.at("values"), g.value("name", "group")));
    auto bf = gobs::stats::brown_forsythe(groups);
    out["brown_forsythe"] = {{"F", bf.f}, {"df1", bf.df1}, {"df2", bf.df2}, {"p", bf.p}};
  }
  if (want.count("kappa") && in.contains("tables")) {
    for (const auto& t : in.at("tables")) {
      std::vector<std::vector<double>> table;
      for (const auto& row : t.at("table")) table.push_back(numbers(row, "table row"));
      out["kappa"][t.value("name", "table")] = gobs::stats::cohens_kappa(table);
    }
  }
  std::cout << out.dump(2) << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grounded observer: gated chat, proxy service, evaluation and statistics"};
  app.require_subcommand(1);

  std::string config_path, rules_path, base_url, addr = "127.0.0.1:8080", store_dir, token_env;
  std::string corpus_path, out_dir, mode = "observer", annotations_path, in_path;
  std::optional<std::uint64_t> seed;
  bool trace = false, holm = false;
  std::vector<std::string> tests{"wilcoxon", "t", "bf"};

  auto* chat = app.add_subcommand("chat", "Interactive gated chat on stdin/stdout");
  chat->add_option("--config", config_path, "Engine config (JSON)")->check(CLI::ExistingFile);
  chat->add_option("--rules", rules_path, "Overlay rules (JSON)")->check(CLI::ExistingFile);
  chat->add_option("--seed", seed, "Gate RNG seed");
  chat->add_option("--base-url", base_url, "Chat-completions endpoint of the base model");
  chat->add_flag("--trace", trace, "Print each evaluation record to stderr");

  auto* serve = app.add_subcommand("serve", "Run the chat-completions proxy");
  serve->add_option("--addr", addr, "host:port")->capture_default_str();
  serve->add_option("--config", config_path, "Engine config (JSON)")->check(CLI::ExistingFile);
  serve->add_option("--rules", rules_path, "Overlay rules (JSON)")->check(CLI::ExistingFile);
  serve->add_option("--store-dir", store_dir, "Directory for the JSONL event log");
  serve->add_option("--bearer-token-env", token_env, "Variable holding the bearer token clients must send");

  auto* eval = app.add_subcommand("eval", "Replay a corpus through the engine and write a report");
  eval->add_option("--corpus", corpus_path, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", out_dir, "Output directory")->required();
  eval->add_option("--mode", mode, "observer or base")->check(CLI::IsMember({"observer", "base"}))->capture_default_str();
  eval->add_option("--config", config_path, "Engine config (JSON)")->check(CLI::ExistingFile);
  eval->add_option("--rules", rules_path, "Overlay rules (JSON)")->check(CLI::ExistingFile);
  eval->add_option("--base-url", base_url, "Chat-completions endpoint of the base model (default: replay the corpus)");

  auto* score = app.add_subcommand("score", "Automatic Likert scoring and human-likeness");
  score->add_option("--corpus", corpus_path, "Corpus JSONL")->required()->check(CLI::ExistingFile);
  score->add_option("--annotations", annotations_path, "Annotation JSONL")->check(CLI::ExistingFile);
  score->add_option("--out", out_dir, "Also write report.md and report.csv here");
  score->add_option("--config", config_path, "Engine config (JSON)")->check(CLI::ExistingFile);

  auto* stats = app.add_subcommand("stats", "Run statistical tests on JSON input");
  stats->add_option("--in", in_path, "Input JSON")->required()->check(CLI::ExistingFile);
  stats->add_option("--tests", tests, "wilcoxon,t,bf,kappa")->delimiter(',')->capture_default_str();
  stats->add_flag("--holm", holm, "Holm-correct p-values within each test family");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*chat) return cmd_chat(config_path, rules_path, seed, base_url, trace);
    if (*serve) return cmd_serve(addr, config_path, rules_path, store_dir, token_env);
    if (*eval) return cmd_eval(corpus_path, out_dir, mode, config_path, rules_path, base_url);
    if (*score) return cmd_score(corpus_path, annotations_path, out_dir, config_path);
    if (*stats) return cmd_stats(in_path, tests, holm);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const gobs::TransportError& e) {
    std::cerr << "upstream error: " << e.what() << "\n";
    return kUpstream;
  } catch (const gobs::TurnError& e) {
    std::cerr << "upstream error: " << e.what() << "\n";
    return kUpstream;
  } catch (const gobs::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const gobs::json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
