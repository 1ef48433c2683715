#include "dupdetect/transport.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "dupdetect/error.hpp"

namespace dupdetect {

namespace {

class HttplibTransport final : public HttpTransport {
 public:
  explicit HttplibTransport(std::chrono::milliseconds timeout) : timeout_(timeout) {}

  HttpResponse post(const std::string& url, const std::string& body, const HttpHeaders& headers) override {
    // scheme://host[:port]/path
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw ConfigError("endpoint URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client.Post(path, h, body, "application/json");
    if (!res) throw NetworkError(url + ": " + httplib::to_string(res.error()));
    return HttpResponse{res->status, res->body};
  }

 private:
  std::chrono::milliseconds timeout_;
};

bool transient(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

std::unique_ptr<HttpTransport> make_http_transport(std::chrono::milliseconds timeout) {
  return std::make_unique<HttplibTransport>(timeout);
}

Sleeper real_sleeper() {
  return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string post_with_retry(HttpTransport& transport, const std::string& url, const std::string& body,
                            const HttpHeaders& headers, const RetryPolicy& policy, const Sleeper& sleeper) {
  const int attempts = std::max(1, policy.max_attempts);
  auto backoff = policy.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    try {
      const auto res = transport.post(url, body, headers);
      if (res.status >= 200 && res.status < 300) return res.body;
      if (res.status == 401 || res.status == 403) throw AuthError("HTTP " + std::to_string(res.status) + " from " + url);
      if (!transient(res.status))
        throw ProviderError("HTTP " + std::to_string(res.status) + " from " + url + ": " + res.body.substr(0, 200));
      last_error = "HTTP " + std::to_string(res.status);
    } catch (const NetworkError& e) {
      last_error = e.what();
    }
    if (attempt < attempts) {
      if (sleeper) sleeper(backoff);
      const auto next = std::chrono::duration<double, std::milli>(backoff) * policy.multiplier;
      backoff = std::min(policy.max_backoff, std::chrono::duration_cast<std::chrono::milliseconds>(next));
    }
  }
  throw NetworkError("giving up on " + url + " after " + std::to_string(attempts) + " attempts (" + last_error + ")");
}

HttpHeaders bearer_headers(const std::string& env_var) {
  HttpHeaders h;
  if (const char* token = std::getenv(env_var.c_str()); token && *token)
    h.emplace("Authorization", std::string("Bearer ") + token);
  return h;
}

}  // namespace dupdetect
