#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace synque {

using Headers = std::vector<std::pair<std::string, std::string>>;

struct HttpResponse {
  int status = 0;  // 0 means the request never reached the server
  std::string body;
  std::string error;
};

/// Minimal POST transport so endpoint clients can be tested against fakes.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post_json(const std::string& url, const std::string& body,
                                 const Headers& headers, std::chrono::milliseconds timeout) = 0;
};

// cpp-httplib backed transport; https requires the library to be built with OpenSSL.
std::shared_ptr<HttpTransport> make_http_transport();

struct RetryPolicy {
  int max_retries = 4;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{8000};
  std::chrono::milliseconds timeout{60000};
};

// 429, 5xx and connection failures are retried; everything else returns immediately.
bool is_transient(const HttpResponse& response);

struct PostOutcome {
  HttpResponse response;
  int retries = 0;
};

// POST with exponential backoff. Throws EndpointError once retries are exhausted or
// on a non-transient failure status.
PostOutcome post_with_retry(HttpTransport& transport, const std::string& url,
                            const std::string& body, const Headers& headers,
                            const RetryPolicy& policy);

// Bearer header from an environment variable, empty when unset.
Headers auth_headers_from_env(const std::string& env_var);

}  // namespace synque
