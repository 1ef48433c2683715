#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "dupdetect/classify.hpp"
#include "dupdetect/corpus.hpp"
#include "dupdetect/embed.hpp"
#include "dupdetect/partition.hpp"
#include "dupdetect/summarize.hpp"
#include "dupdetect/transport.hpp"

namespace dupdetect {

enum class Command { kIngest, kPreprocess, kTopics, kPartition, kEmbed, kDetect, kEvaluate, kSweep, kTrain, kElbow, kSummarize };

Command parse_command(std::string_view name);
std::string_view to_string(Command command);
const std::vector<std::string>& command_names();

struct RunConfig {
  std::filesystem::path dataset;
  CorpusFormat format = CorpusFormat::kJsonl;
  std::filesystem::path links;  // optional `dup_id,master_id` sidecar

  PartitionStrategy strategy = PartitionStrategy::kTopic;
  int k_topics = 7;
  int lda_iterations = 1000;
  std::optional<double> lda_alpha;
  double lda_beta = 0.01;
  int kmeans_k = 10;
  int kmeans_restarts = 5;
  int elbow_max_k = 20;

  EmbeddingProviderConfig embedding;

  std::vector<double> deltas;  // empty: command default
  std::vector<std::size_t> k_list{5, 10, 15, 20};
  bool causal = false;
  // Threshold and top-k queries: every report, or the test split when set.
  std::optional<SplitScheme> query_split;

  ClassifierKind classifier = ClassifierKind::kMlp;
  bool use_text_embedding = true;
  bool use_component = false;
  MlpConfig mlp;
  bool per_topic = false;
  std::size_t min_topic_size = 50;
  bool balance = false;
  bool resolved_fixed_only = true;
  SplitScheme train_split = SplitScheme::kTrain75Test25;

  std::optional<SummarizerConfig> summarizer;

  std::uint64_t seed = 42;
  std::filesystem::path out = "dupdetect-out";
  std::filesystem::path cache_dir;  // default: <out>/cache or DUPDETECT_CACHE_DIR

  // Sets one `key = value` setting. Throws ConfigError for unknown keys or bad values.
  void set(const std::string& key, const std::string& value);

  // Throws ConfigError.
  void validate() const;

  // Semantic settings only; the output location is excluded.
  nlohmann::ordered_json to_json() const;
  std::string hash() const;

  std::vector<double> deltas_for(Command command) const;
};

// JSON object of flat settings, or `key = value` lines (# comments).
RunConfig load_run_config(const std::filesystem::path& path);
void apply_config_text(RunConfig& config, std::string_view text);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct RunManifest {
  std::string command;
  std::string status = "ok";  // "ok" or "failed"
  std::string error;
  std::string failed_stage;
  std::string config_hash;
  nlohmann::ordered_json config;
  std::map<std::string, std::string> input_hashes;  // path -> sha256
  std::uint64_t seed = 0;
  std::vector<StageTiming> stages;
  std::map<std::string, std::string> outputs;  // file name -> sha256
  std::string started_at;
  std::string finished_at;

  nlohmann::ordered_json to_json() const;
};

// Injection points for tests; null transports fall back to HTTP.
struct PipelineHooks {
  HttpTransport* embed_transport = nullptr;
  HttpTransport* llm_transport = nullptr;
  Sleeper sleeper = real_sleeper();
};

// Runs one command end to end under config.out and writes manifest.json.
// Stage failures are rethrown with the stage name; the manifest then records
// status "failed" and the outputs written so far.
RunManifest run_pipeline(const RunConfig& config, Command command = Command::kEvaluate, const PipelineHooks& hooks = {});

}  // namespace dupdetect
