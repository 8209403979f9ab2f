#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <string>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "gobs/core/config.hpp"
#include "gobs/core/error.hpp"

namespace gobs {

struct Url {
  std::string scheme_host_port;  // e.g. http://127.0.0.1:8080
  std::string path;              // e.g. /v1/chat/completions
};

inline Url parse_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("url", "missing scheme in '" + url + "'");
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return Url{url, "/"};
  return Url{url.substr(0, path_start), url.substr(path_start)};
}

// POSTs JSON with retries on transport failures, 429 and 5xx. Backoff doubles
// from descriptor.backoff_ms. Error texts never include request headers.
class JsonPoster {
 public:
  explicit JsonPoster(ProviderDescriptor descriptor)
      : d_(std::move(descriptor)), url_(parse_url(d_.url)) {}

  json post(const json& body) const {
    const int attempts = 1 + d_.max_retries;
    std::string last_error;
    for (int i = 0; i < attempts; ++i) {
      if (i > 0 && d_.backoff_ms > 0)
        std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(d_.backoff_ms) << (i - 1)));
      attempts_made_.fetch_add(1, std::memory_order_relaxed);
      httplib::Client cli(url_.scheme_host_port);
      if (!cli.is_valid()) throw TransportError("unsupported upstream url scheme: " + url_.scheme_host_port);
      auto timeout = std::chrono::milliseconds(d_.timeout_ms);
      cli.set_connection_timeout(timeout);
      cli.set_read_timeout(timeout);
      cli.set_write_timeout(timeout);
      httplib::Headers headers;
      if (!d_.credential_env.empty()) {
        if (const char* secret = std::getenv(d_.credential_env.c_str()); secret && *secret)
          headers.emplace("Authorization", std::string("Bearer ") + secret);
      }
      auto res = cli.Post(url_.path, headers, body.dump(), "application/json");
      if (!res) {
        last_error = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 429 || res->status >= 500) {
        last_error = "upstream status " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300)
        throw TransportError("upstream " + url_.scheme_host_port + url_.path + " returned status " +
                             std::to_string(res->status));
      try {
        return json::parse(res->body);
      } catch (const json::parse_error&) {
        throw MalformedReplyError("upstream reply is not JSON");
      }
    }
    throw TransportError("upstream " + url_.scheme_host_port + url_.path + " failed after " +
                         std::to_string(attempts) + " attempt(s): " + last_error);
  }

  int attempts_made() const noexcept { return attempts_made_.load(); }
  const ProviderDescriptor& descriptor() const noexcept { return d_; }

 private:
  ProviderDescriptor d_;
  Url url_;
  mutable std::atomic<int> attempts_made_{0};
};

}  // namespace gobs
