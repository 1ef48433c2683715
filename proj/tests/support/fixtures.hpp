#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "dupdetect/corpus.hpp"
#include "dupdetect/rng.hpp"
#include "dupdetect/transport.hpp"

namespace testing {

using dupdetect::BugReport;
using dupdetect::Corpus;
using dupdetect::ReportId;

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "dupdetect-test-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline BugReport make_report(ReportId id, const std::string& summary, const std::string& description = {},
                             std::optional<ReportId> dup_of = std::nullopt, const std::string& component = "Core",
                             const std::string& when = "2005-05-14T10:00:00Z") {
  BugReport r;
  r.id = id;
  r.created_at = dupdetect::parse_timestamp(when);
  r.summary = summary;
  r.description = description;
  r.component = component;
  r.product = "Platform";
  r.status = "RESOLVED";
  r.resolution = dup_of ? std::optional<std::string>("DUPLICATE") : std::optional<std::string>("FIXED");
  r.dup_of = dup_of;
  r.is_duplicate = dup_of.has_value();
  return r;
}

// Counts calls and answers through `handler`.
class StubTransport : public dupdetect::HttpTransport {
 public:
  using Handler = std::function<dupdetect::HttpResponse(int call, const std::string& url, const std::string& body,
                                                        const dupdetect::HttpHeaders& headers)>;
  explicit StubTransport(Handler handler) : handler_(std::move(handler)) {}

  dupdetect::HttpResponse post(const std::string& url, const std::string& body,
                               const dupdetect::HttpHeaders& headers) override {
    const int call = ++calls_;
    {
      std::lock_guard lock(mutex_);
      bodies_.push_back(body);
      headers_.push_back(headers);
    }
    return handler_(call, url, body, headers);
  }

  int calls() const { return calls_.load(); }
  std::vector<std::string> bodies() const {
    std::lock_guard lock(mutex_);
    return bodies_;
  }
  std::vector<dupdetect::HttpHeaders> headers() const {
    std::lock_guard lock(mutex_);
    return headers_;
  }

 private:
  Handler handler_;
  std::atomic<int> calls_{0};
  mutable std::mutex mutex_;
  std::vector<std::string> bodies_;
  std::vector<dupdetect::HttpHeaders> headers_;
};

// Embedding endpoint stub: a deterministic `dim`-vector per input text.
inline dupdetect::HttpResponse fake_embeddings(const std::string& body, int dim) {
  const auto req = nlohmann::json::parse(body);
  nlohmann::json out;
  out["embeddings"] = nlohmann::json::array();
  for (const auto& text : req.at("input")) {
    const auto s = text.get<std::string>();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ULL;
    std::vector<double> v;
    for (int i = 0; i < dim; ++i) v.push_back(static_cast<double>(dupdetect::splitmix64(h + static_cast<std::uint64_t>(i)) % 1000) / 1000.0 - 0.5);
    out["embeddings"].push_back(v);
  }
  return {200, out.dump()};
}

inline dupdetect::Sleeper no_sleep() {
  return [](std::chrono::milliseconds) {};
}

// Sets an environment variable for the lifetime of the object.
class ScopedEnv {
 public:
  ScopedEnv(const char* name, const char* value) : name_(name) {
    if (const char* old = std::getenv(name)) old_ = old;
    if (value) ::setenv(name, value, 1);
    else ::unsetenv(name);
  }
  ~ScopedEnv() {
    if (old_) ::setenv(name_.c_str(), old_->c_str(), 1);
    else ::unsetenv(name_.c_str());
  }

 private:
  std::string name_;
  std::optional<std::string> old_;
};

}  // namespace testing
