#include "synque/http.hpp"

#include "synque/errors.hpp"

#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>
#include <regex>
#include <thread>

namespace synque {

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

SplitUrl split_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw ConfigError(fmt::format("invalid endpoint URL '{}'", url));
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

class HttplibTransport final : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& url, const std::string& body, const Headers& headers,
                         std::chrono::milliseconds timeout) override {
    const auto target = split_url(url);
    httplib::Client client(target.origin);
    const auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
    const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = client.Post(target.path, h, body, "application/json");
    if (!res) return {0, {}, httplib::to_string(res.error())};
    return {res->status, res->body, {}};
  }
};

}  // namespace

std::shared_ptr<HttpTransport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

bool is_transient(const HttpResponse& response) {
  return response.status == 0 || response.status == 429 || response.status >= 500;
}

PostOutcome post_with_retry(HttpTransport& transport, const std::string& url,
                            const std::string& body, const Headers& headers,
                            const RetryPolicy& policy) {
  PostOutcome outcome;
  for (int attempt = 0;; ++attempt) {
    outcome.response = transport.post_json(url, body, headers, policy.timeout);
    const auto& r = outcome.response;
    if (r.status >= 200 && r.status < 300) return outcome;
    const std::string reason = r.status == 0 ? r.error : fmt::format("HTTP {}", r.status);
    if (!is_transient(r))
      throw EndpointError(fmt::format("POST {} failed: {}: {}", url, reason, r.body.substr(0, 200)),
                          r.status);
    if (attempt >= policy.max_retries)
      throw EndpointError(
          fmt::format("POST {} failed after {} retries: {}", url, outcome.retries, reason), r.status);
    const std::chrono::milliseconds delay =
        std::min<std::chrono::milliseconds>(policy.max_delay, policy.base_delay * (1LL << std::min(attempt, 20)));
    spdlog::warn("POST {} -> {}; retry {} in {} ms", url, reason, attempt + 1, delay.count());
    std::this_thread::sleep_for(delay);
    ++outcome.retries;
  }
}

Headers auth_headers_from_env(const std::string& env_var) {
  if (env_var.empty()) return {};
  const char* key = std::getenv(env_var.c_str());
  if (key == nullptr || *key == '\0') return {};
  return {{"Authorization", fmt::format("Bearer {}", key)}};
}

}  // namespace synque
