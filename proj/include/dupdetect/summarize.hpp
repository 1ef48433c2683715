#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dupdetect/cache.hpp"
#include "dupdetect/corpus.hpp"
#include "dupdetect/transport.hpp"

namespace dupdetect {

// Sent verbatim as the system message.
inline constexpr std::string_view kSummaryPrompt =
    "I want you to act as a collaborator for maintaining bug reports from a large open source software project. "
    "Your job is to rephrase the reports to avoid repetition while keeping semantic meaning. The goal of this "
    "process is to help filter duplicates. Please only output the summary of the bug report.";

struct SummarizerConfig {
  std::string endpoint;
  std::string model;
  std::string token_env = "DUPDETECT_LLM_TOKEN";
  std::size_t max_reports = 2000;
  double temperature = 0.0;
  std::filesystem::path cache_dir;  // empty disables caching
  std::chrono::milliseconds timeout{60'000};
  RetryPolicy retry;
  int concurrency = 4;
  // Overrides "first max_reports in corpus order" when set.
  std::optional<std::vector<ReportId>> ids;

  // Throws ConfigError.
  void validate() const;
};

// {"model", "temperature", "messages": [system prompt, user text]}
std::string chat_request_body(const std::string& model, double temperature, std::string_view user_text);

// choices[0].message.content. Throws EmptyCompletion, ProviderShapeError.
std::string parse_chat_response(std::string_view body);

class Summarizer {
 public:
  Summarizer(SummarizerConfig config, HttpTransport& transport, Sleeper sleeper = real_sleeper());

  // Cached by (model, prompt hash, text hash).
  // Throws NetworkError, AuthError, EmptyCompletion.
  std::string summarize(const BugReport& report);

  // Cache misses sent to the endpoint (retries not counted).
  std::size_t requests_sent() const noexcept { return requests_.load(); }
  const SummarizerConfig& config() const noexcept { return config_; }

 private:
  std::string cache_key(const std::string& text) const;

  SummarizerConfig config_;
  HttpTransport& transport_;
  Sleeper sleeper_;
  HttpHeaders headers_;
  std::optional<DiskCache> cache_;
  std::atomic<std::size_t> requests_{0};
};

std::string summarize_report(const BugReport& report, const SummarizerConfig& config, HttpTransport& transport,
                             Sleeper sleeper = real_sleeper());

struct SummaryFailure {
  ReportId id = 0;
  std::string error;
};

struct SummarizedCorpus {
  std::map<ReportId, std::string> summaries;  // ids exist in the base corpus
  std::string model;
  std::string prompt_sha256;
  std::size_t requested = 0;
  std::vector<SummaryFailure> failures;
  std::string started_at;
  std::string finished_at;

  // Summarized reports only, with summary = generated text and an empty
  // description. The base corpus is not modified.
  Corpus apply(const Corpus& base) const;

  // Deterministic view (no timestamps).
  nlohmann::ordered_json to_json() const;
  static SummarizedCorpus from_json(const nlohmann::json& j);
};

// The reports that summarize_corpus would process.
std::vector<ReportId> summary_targets(const Corpus& corpus, const SummarizerConfig& config);

// Per-report failures are recorded and skipped.
SummarizedCorpus summarize_corpus(const Corpus& corpus, const SummarizerConfig& config, HttpTransport& transport,
                                  Sleeper sleeper = real_sleeper());

}  // namespace dupdetect
