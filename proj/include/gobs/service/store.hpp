#pragma once

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gobs/engine/engine.hpp"
#include "gobs/engine/record.hpp"

namespace gobs {

// Append-only JSONL event log, one file per UTC day. append() returns only
// after the line reached stable storage (fdatasync). Lines are never rewritten.
//
// Event shapes:
//   {"type":"session","session":id,"seed":u64,"ts_ms":...}
//   {"type":"turn","session":id,"human":Turn,"agent":Turn,"record":EvaluationRecord,"ts_ms":...}
//   {"type":"config","config":{...},"rules":{"rules":[...]},"ts_ms":...}
class JsonlStore {
 public:
  JsonlStore() = default;  // in-memory only: append() is a no-op
  explicit JsonlStore(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  bool persistent() const noexcept { return !dir_.empty(); }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  static std::string day_file_name(std::int64_t ts_ms) {
    std::time_t secs = static_cast<std::time_t>(ts_ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "records-%Y-%m-%d.jsonl", &tm);
    return buf;
  }

  void append(const json& event, std::int64_t ts_ms) {
    if (!persistent()) return;
    std::string line = event.dump() + "\n";
    auto path = dir_ / day_file_name(ts_ms);
    std::lock_guard lock(mu_);
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd < 0) throw Error("store: cannot open " + path.string() + ": " + std::strerror(errno));
    std::size_t off = 0;
    while (off < line.size()) {
      ssize_t n = ::write(fd, line.data() + off, line.size() - off);
      if (n < 0) {
        if (errno == EINTR) continue;
        int err = errno;
        ::close(fd);
        throw Error("store: write failed: " + std::string(std::strerror(err)));
      }
      off += static_cast<std::size_t>(n);
    }
    if (::fdatasync(fd) != 0) {
      int err = errno;
      ::close(fd);
      throw Error("store: fdatasync failed: " + std::string(std::strerror(err)));
    }
    ::close(fd);
  }

  struct PersistedSession {
    SessionState state;
    std::uint64_t seed = 0;
    std::vector<EvaluationRecord> records;
    std::int64_t created_ms = 0;
    std::int64_t updated_ms = 0;
  };

  struct Replay {
    std::map<std::string, PersistedSession> sessions;
    std::optional<json> config;
    std::optional<json> rules;
    std::vector<std::string> warnings;
    std::size_t events = 0;
  };

  // Rebuilds every session's visible state from the log. A malformed line is
  // skipped with a warning (a torn final write after a crash looks like this).
  Replay replay() const {
    Replay out;
    if (!persistent() || !std::filesystem::exists(dir_)) return out;
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir_))
      if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::ifstream in(f);
      std::string line;
      std::size_t no = 0;
      while (std::getline(in, line)) {
        ++no;
        if (line.empty()) continue;
        try {
          apply(json::parse(line), out);
          ++out.events;
        } catch (const std::exception& e) {
          out.warnings.push_back(f.filename().string() + ":" + std::to_string(no) + ": " + e.what());
        }
      }
    }
    return out;
  }

 private:
  static void apply(const json& ev, Replay& out) {
    const auto type = ev.at("type").get<std::string>();
    const auto ts = ev.value("ts_ms", std::int64_t{0});
    if (type == "session") {
      auto id = ev.at("session").get<std::string>();
      auto& s = out.sessions[id];
      s.seed = ev.at("seed").get<std::uint64_t>();
      s.state.id = id;
      s.state.conversation.id = id;
      s.state.rng = RngState(s.seed);
      s.created_ms = s.updated_ms = ts;
    } else if (type == "turn") {
      auto id = ev.at("session").get<std::string>();
      auto it = out.sessions.find(id);
      if (it == out.sessions.end()) throw Error("turn for unknown session " + id);
      auto& s = it->second;
      s.state.conversation.turns.push_back(turn_from_json(ev.at("human")));
      s.state.conversation.turns.push_back(turn_from_json(ev.at("agent")));
      auto rec = record_from_json(ev.at("record"));
      s.state.pending_implicit = rec.pending_implicit;
      s.state.rng = RngState(s.seed, rec.rng_counter);
      s.records.push_back(std::move(rec));
      s.updated_ms = ts;
    } else if (type == "config") {
      out.config = ev.at("config");
      out.rules = ev.at("rules");
    } else {
      throw Error("unknown event type '" + type + "'");
    }
  }

  std::filesystem::path dir_;
  std::mutex mu_;
};

}  // namespace gobs
