#pragma once

#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <string>

namespace dupdetect {

struct HttpResponse {
  int status = 0;
  std::string body;
};

using HttpHeaders = std::multimap<std::string, std::string>;

// Minimal POST-only transport so providers can be exercised against stubs.
// Implementations throw NetworkError when no response was received and must
// be safe to call from several threads.
class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers) = 0;
};

// cpp-httplib backed transport; http:// and https:// URLs.
std::unique_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout = std::chrono::seconds(60));

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30'000};
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Sleeps on the calling thread.
Sleeper real_sleeper();

// POSTs with exponential backoff on transport failures, 429 and 5xx.
// 401/403 raise AuthError immediately; other non-2xx raise ProviderError.
// Returns the body of the first 2xx response.
std::string post_with_retry(HttpTransport& transport, const std::string& url, const std::string& body,
                            const HttpHeaders& headers, const RetryPolicy& policy, const Sleeper& sleeper);

// Authorization header from an environment variable; empty when unset.
HttpHeaders bearer_headers(const std::string& env_var);

}  // namespace dupdetect
