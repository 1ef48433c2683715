#include "dupdetect/summarize.hpp"

#include <algorithm>
#include <mutex>
#include <thread>

#include "dupdetect/error.hpp"
#include "dupdetect/hash.hpp"
#include "dupdetect/textprep.hpp"

namespace dupdetect {

namespace {

std::string now_utc() { return format_timestamp(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now())); }

}  // namespace

void SummarizerConfig::validate() const {
  if (endpoint.empty()) throw ConfigError("summarizer needs an endpoint");
  if (model.empty()) throw ConfigError("summarizer needs a model name");
  if (max_reports < 1) throw ConfigError("summarizer max_reports must be >= 1");
  if (!(temperature >= 0.0)) throw ConfigError("summarizer temperature must be >= 0");
  if (concurrency < 1) throw ConfigError("summarizer concurrency must be >= 1");
}

std::string chat_request_body(const std::string& model, double temperature, std::string_view user_text) {
  nlohmann::ordered_json body;
  body["model"] = model;
  if (temperature == 0.0) body["temperature"] = 0;
  else body["temperature"] = temperature;
  body["messages"] = nlohmann::ordered_json::array(
      {nlohmann::ordered_json{{"role", "system"}, {"content", std::string(kSummaryPrompt)}},
       nlohmann::ordered_json{{"role", "user"}, {"content", std::string(user_text)}}});
  return body.dump();
}

std::string parse_chat_response(std::string_view body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderShapeError(std::string("completion is not JSON: ") + e.what());
  }
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array()) throw ProviderShapeError("completion has no choices array");
  if (choices->empty()) throw EmptyCompletion();
  const auto& first = (*choices)[0];
  if (!first.contains("message") || !first["message"].contains("content"))
    throw ProviderShapeError("first choice has no message content");
  const auto& content = first["message"]["content"];
  if (content.is_null()) throw EmptyCompletion();
  if (!content.is_string()) throw ProviderShapeError("message content is not a string");
  auto text = content.get<std::string>();
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw EmptyCompletion();
  return text;
}

Summarizer::Summarizer(SummarizerConfig config, HttpTransport& transport, Sleeper sleeper)
    : config_(std::move(config)), transport_(transport), sleeper_(std::move(sleeper)) {
  config_.validate();
  headers_ = bearer_headers(config_.token_env);
  if (!config_.cache_dir.empty()) cache_.emplace(config_.cache_dir, "summary");
}

std::string Summarizer::cache_key(const std::string& text) const {
  static const std::string prompt_hash = sha256_hex(kSummaryPrompt);
  return config_.model + '\0' + prompt_hash + '\0' + sha256_hex(text);
}

std::string Summarizer::summarize(const BugReport& report) {
  const std::string text = full_text(report);
  const std::string key = cache_key(text);
  if (cache_) {
    if (auto hit = cache_->get(key)) return *hit;
  }
  ++requests_;
  const std::string response = post_with_retry(
      transport_, config_.endpoint, chat_request_body(config_.model, config_.temperature, text), headers_,
      config_.retry, sleeper_);
  std::string summary = parse_chat_response(response);
  if (cache_) cache_->put(key, summary);
  return summary;
}

std::string summarize_report(const BugReport& report, const SummarizerConfig& config, HttpTransport& transport,
                             Sleeper sleeper) {
  Summarizer s(config, transport, std::move(sleeper));
  return s.summarize(report);
}

Corpus SummarizedCorpus::apply(const Corpus& base) const {
  std::vector<BugReport> out;
  out.reserve(summaries.size());
  for (const auto& [id, text] : summaries) {
    BugReport r = base.at(id);
    r.summary = text;
    r.description.clear();
    out.push_back(std::move(r));
  }
  return Corpus(std::move(out), base.source() + "#summarized");
}

nlohmann::ordered_json SummarizedCorpus::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["prompt_sha256"] = prompt_sha256;
  j["requested"] = requested;
  j["summarized"] = summaries.size();
  nlohmann::ordered_json s = nlohmann::ordered_json::array();
  for (const auto& [id, text] : summaries) s.push_back({{"id", id}, {"summary", text}});
  j["summaries"] = std::move(s);
  nlohmann::ordered_json f = nlohmann::ordered_json::array();
  for (const auto& fail : failures) f.push_back({{"id", fail.id}, {"error", fail.error}});
  j["failures"] = std::move(f);
  return j;
}

SummarizedCorpus SummarizedCorpus::from_json(const nlohmann::json& j) {
  try {
    SummarizedCorpus s;
    s.model = j.at("model").get<std::string>();
    s.prompt_sha256 = j.at("prompt_sha256").get<std::string>();
    s.requested = j.at("requested").get<std::size_t>();
    for (const auto& e : j.at("summaries")) s.summaries.emplace(e.at("id").get<ReportId>(), e.at("summary").get<std::string>());
    for (const auto& e : j.at("failures")) s.failures.push_back({e.at("id").get<ReportId>(), e.at("error").get<std::string>()});
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(0, "summaries", e.what());
  }
}

std::vector<ReportId> summary_targets(const Corpus& corpus, const SummarizerConfig& config) {
  std::vector<ReportId> targets;
  if (config.ids) {
    for (ReportId id : *config.ids) {
      corpus.at(id);  // throws for an unknown id
      targets.push_back(id);
    }
    return targets;
  }
  const std::size_t n = std::min(config.max_reports, corpus.size());
  targets.reserve(n);
  for (std::size_t i = 0; i < n; ++i) targets.push_back(corpus.reports()[i].id);
  return targets;
}

SummarizedCorpus summarize_corpus(const Corpus& corpus, const SummarizerConfig& config, HttpTransport& transport,
                                  Sleeper sleeper) {
  Summarizer summarizer(config, transport, std::move(sleeper));
  const std::vector<ReportId> targets = summary_targets(corpus, config);
  SummarizedCorpus out;
  out.model = config.model;
  out.prompt_sha256 = sha256_hex(kSummaryPrompt);
  out.requested = targets.size();
  out.started_at = now_utc();

  std::vector<std::optional<std::string>> results(targets.size());
  std::vector<std::string> errors(targets.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < targets.size();) {
      try {
        results[i] = summarizer.summarize(corpus.at(targets[i]));
      } catch (const AuthError&) {
        throw;  // never recoverable per report
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  std::exception_ptr fatal;
  std::mutex fatal_mutex;
  auto guarded = [&] {
    try {
      worker();
    } catch (...) {
      std::lock_guard lock(fatal_mutex);
      if (!fatal) fatal = std::current_exception();
      next = targets.size();
    }
  };
  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.concurrency), targets.size());
  if (workers <= 1) {
    guarded();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(guarded);
  }
  if (fatal) std::rethrow_exception(fatal);

  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (results[i]) out.summaries.emplace(targets[i], std::move(*results[i]));
    else out.failures.push_back({targets[i], errors[i]});
  }
  out.finished_at = now_utc();
  return out;
}

}  // namespace dupdetect
