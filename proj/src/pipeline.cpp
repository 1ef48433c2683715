#include "dupdetect/pipeline.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <sstream>

#include "dupdetect/engine.hpp"
#include "dupdetect/error.hpp"
#include "dupdetect/hash.hpp"
#include "dupdetect/lda.hpp"
#include "dupdetect/metrics.hpp"
#include "dupdetect/report.hpp"
#include "dupdetect/textprep.hpp"

namespace dupdetect {

namespace {

const std::vector<std::pair<Command, std::string>>& command_table() {
  static const std::vector<std::pair<Command, std::string>> table{
      {Command::kIngest, "ingest"},   {Command::kPreprocess, "preprocess"}, {Command::kTopics, "topics"},
      {Command::kPartition, "partition"}, {Command::kEmbed, "embed"},    {Command::kDetect, "detect"},
      {Command::kEvaluate, "evaluate"}, {Command::kSweep, "sweep"},       {Command::kTrain, "train"},
      {Command::kElbow, "elbow"},     {Command::kSummarize, "summarize"}};
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  for (std::string item; std::getline(ss, item, ',');) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("setting '" + key + "': invalid value '" + value + "' (expected " + expected + ")");
}

long long to_int(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(value, &used);
    if (used != value.size()) bad_value(key, value, "an integer");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "an integer");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const std::logic_error&) {
    bad_value(key, value, "a number");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") return false;
  bad_value(key, value, "true or false");
}

std::string_view format_name(CorpusFormat f) {
  switch (f) {
    case CorpusFormat::kJsonl:
      return "jsonl";
    case CorpusFormat::kCsv:
      return "csv";
    case CorpusFormat::kBinary:
      return "bin";
  }
  return "jsonl";
}

SummarizerConfig& summarizer_of(RunConfig& c) {
  if (!c.summarizer) c.summarizer.emplace();
  return *c.summarizer;
}

std::string now_utc() {
  return format_timestamp(std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now()));
}

}  // namespace

Command parse_command(std::string_view name) {
  for (const auto& [c, n] : command_table())
    if (n == name) return c;
  throw ConfigError("unknown command '" + std::string(name) + "'");
}

std::string_view to_string(Command command) {
  for (const auto& [c, n] : command_table())
    if (c == command) return n;
  return "evaluate";
}

const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (const auto& [c, n] : command_table()) v.push_back(n);
    return v;
  }();
  return names;
}

void RunConfig::set(const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto positive = [&](long long v) {
    if (v < 1) bad_value(key, value, "a positive integer");
    return v;
  };
  if (key == "dataset") dataset = value;
  else if (key == "format") format = parse_corpus_format(value);
  else if (key == "links") links = value;
  else if (key == "strategy") strategy = parse_partition_strategy(value);
  else if (key == "k_topics") k_topics = static_cast<int>(to_int(key, value));
  else if (key == "lda_iterations") lda_iterations = static_cast<int>(positive(to_int(key, value)));
  else if (key == "lda_alpha") lda_alpha = to_double(key, value);
  else if (key == "lda_beta") lda_beta = to_double(key, value);
  else if (key == "kmeans_k") kmeans_k = static_cast<int>(positive(to_int(key, value)));
  else if (key == "kmeans_restarts") kmeans_restarts = static_cast<int>(positive(to_int(key, value)));
  else if (key == "max_k") elbow_max_k = static_cast<int>(positive(to_int(key, value)));
  else if (key == "embedding") {
    if (value == "internal") embedding.kind = EmbeddingProviderKind::kInternalTfidfProjection;
    else if (value == "external") embedding.kind = EmbeddingProviderKind::kExternalHttp;
    else bad_value(key, value, "internal or external");
  } else if (key == "embedding_dim") embedding.dimension = static_cast<int>(positive(to_int(key, value)));
  else if (key == "embed_endpoint") embedding.external.endpoint = value;
  else if (key == "embed_model") embedding.external.model = value;
  else if (key == "embed_batch") embedding.external.batch_size = static_cast<std::size_t>(positive(to_int(key, value)));
  else if (key == "embed_in_flight") embedding.external.max_in_flight = static_cast<int>(positive(to_int(key, value)));
  else if (key == "delta") {
    deltas.clear();
    for (const auto& d : split_list(value)) deltas.push_back(to_double(key, d));
  } else if (key == "topk") {
    k_list.clear();
    for (const auto& k : split_list(value)) k_list.push_back(static_cast<std::size_t>(positive(to_int(key, k))));
  } else if (key == "causal") causal = to_bool(key, value);
  else if (key == "query_split") {
    if (value == "none" || value.empty()) query_split.reset();
    else query_split = parse_split_scheme(value);
  } else if (key == "classifier") classifier = parse_classifier_kind(value);
  else if (key == "features") {
    if (value == "text") use_text_embedding = true, use_component = false;
    else if (value == "component") use_text_embedding = false, use_component = true;
    else if (value == "text+component") use_text_embedding = true, use_component = true;
    else bad_value(key, value, "text, component or text+component");
  } else if (key == "hidden") mlp.hidden = static_cast<int>(positive(to_int(key, value)));
  else if (key == "epochs") mlp.epochs = static_cast<int>(positive(to_int(key, value)));
  else if (key == "learning_rate") mlp.learning_rate = to_double(key, value);
  else if (key == "batch_size") mlp.batch_size = static_cast<int>(positive(to_int(key, value)));
  else if (key == "per_topic") per_topic = to_bool(key, value);
  else if (key == "min_topic_size") min_topic_size = static_cast<std::size_t>(positive(to_int(key, value)));
  else if (key == "balance") {
    if (value == "undersample") balance = true;
    else if (value == "none") balance = false;
    else balance = to_bool(key, value);
  } else if (key == "resolved_fixed_only") resolved_fixed_only = to_bool(key, value);
  else if (key == "split") train_split = parse_split_scheme(value);
  else if (key == "llm_endpoint") summarizer_of(*this).endpoint = value;
  else if (key == "llm_model") summarizer_of(*this).model = value;
  else if (key == "max_reports") summarizer_of(*this).max_reports = static_cast<std::size_t>(positive(to_int(key, value)));
  else if (key == "temperature") summarizer_of(*this).temperature = to_double(key, value);
  else if (key == "concurrency") summarizer_of(*this).concurrency = static_cast<int>(positive(to_int(key, value)));
  else if (key == "summary_ids") {
    std::vector<ReportId> ids;
    for (const auto& v : split_list(value)) ids.push_back(to_int(key, v));
    summarizer_of(*this).ids = std::move(ids);
  } else if (key == "seed") {
    const long long s = to_int(key, value);
    if (s < 0) bad_value(key, value, "a non-negative integer");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "out") out = value;
  else if (key == "cache_dir") cache_dir = value;
  else throw ConfigError("unknown setting '" + key + "'");
}

void RunConfig::validate() const {
  if (k_topics < 2) throw InvalidK(k_topics);
  if (!(lda_beta > 0)) throw ConfigError("lda_beta must be positive");
  if (lda_alpha && !(*lda_alpha > 0)) throw ConfigError("lda_alpha must be positive");
  for (double d : deltas)
    if (!(d > 0.0 && d <= 1.0)) throw ConfigError("delta must lie in (0, 1], got " + std::to_string(d));
  DetectionConfig det;
  det.k_list = k_list;
  det.validate();
  embedding.validate();
  if (!use_text_embedding && !use_component) throw NoFeaturesEnabled();
  if (!(mlp.learning_rate > 0)) throw ConfigError("learning_rate must be positive");
  if (elbow_max_k < 2) throw ConfigError("max_k must be >= 2");
  if (summarizer) {
    if (!(summarizer->temperature >= 0)) throw ConfigError("temperature must be >= 0");
  }
  if (out.empty()) throw ConfigError("output directory is empty");
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["dataset"] = dataset.string();
  j["format"] = std::string(format_name(format));
  j["links"] = links.string();
  j["strategy"] = std::string(to_string(strategy));
  j["k_topics"] = k_topics;
  j["lda_iterations"] = lda_iterations;
  j["lda_alpha"] = lda_alpha ? nlohmann::ordered_json(*lda_alpha) : nlohmann::ordered_json(nullptr);
  j["lda_beta"] = lda_beta;
  j["kmeans_k"] = kmeans_k;
  j["kmeans_restarts"] = kmeans_restarts;
  j["max_k"] = elbow_max_k;
  const bool internal = embedding.kind == EmbeddingProviderKind::kInternalTfidfProjection;
  j["embedding"] = internal ? "internal" : "external";
  j["embedding_dim"] = embedding.dimension;
  j["embed_endpoint"] = embedding.external.endpoint;
  j["embed_model"] = embedding.external.model;
  j["delta"] = deltas;
  j["topk"] = k_list;
  j["causal"] = causal;
  j["query_split"] = query_split ? std::string(to_string(*query_split)) : std::string("none");
  j["classifier"] = std::string(to_string(classifier));
  j["features"] = use_text_embedding && use_component ? "text+component" : use_component ? "component" : "text";
  j["hidden"] = mlp.hidden;
  j["epochs"] = mlp.epochs;
  j["learning_rate"] = mlp.learning_rate;
  j["batch_size"] = mlp.batch_size;
  j["per_topic"] = per_topic;
  j["min_topic_size"] = min_topic_size;
  j["balance"] = balance ? "undersample" : "none";
  j["resolved_fixed_only"] = resolved_fixed_only;
  j["split"] = std::string(to_string(train_split));
  if (summarizer) {
    j["llm_endpoint"] = summarizer->endpoint;
    j["llm_model"] = summarizer->model;
    j["max_reports"] = summarizer->max_reports;
    j["temperature"] = summarizer->temperature;
    j["summary_ids"] = summarizer->ids ? nlohmann::ordered_json(*summarizer->ids) : nlohmann::ordered_json(nullptr);
  }
  j["seed"] = seed;
  return j;
}

std::string RunConfig::hash() const { return sha256_hex(to_json().dump()); }

std::vector<double> RunConfig::deltas_for(Command command) const {
  if (!deltas.empty()) return deltas;
  if (command == Command::kSweep) return {0.85, 0.90, 0.95};
  return {0.95};
}

void apply_config_text(RunConfig& config, std::string_view text) {
  const std::string body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    for (const auto& [key, value] : j.items()) {
      if (value.is_null()) continue;
      if (value.is_string()) {
        config.set(key, value.get<std::string>());
      } else if (value.is_array()) {
        std::string joined;
        for (const auto& v : value) joined += (joined.empty() ? "" : ",") + (v.is_string() ? v.get<std::string>() : v.dump());
        config.set(key, joined);
      } else {
        config.set(key, value.dump());
      }
    }
    return;
  }
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const std::string t = trim(line.substr(0, line.find('#')));
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    config.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig c;
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  apply_config_text(c, text);
  return c;
}

nlohmann::ordered_json RunManifest::to_json() const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["status"] = status;
  if (status != "ok") {
    j["failed_stage"] = failed_stage;
    j["error"] = error;
    j["partial"] = true;
  }
  j["config_hash"] = config_hash;
  j["config"] = config;
  j["seed"] = seed;
  j["inputs"] = input_hashes;
  nlohmann::ordered_json st = nlohmann::ordered_json::array();
  for (const auto& s : stages) st.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
  j["stages"] = std::move(st);
  j["outputs"] = outputs;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  return j;
}

namespace {

// Exclusive ownership of an output directory for the lifetime of a run.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".dupdetect.lock") {
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f) {
      if (errno == EEXIST)
        throw ConfigError("output directory " + dir.string() + " is locked by another run (remove " +
                          path_.string() + " if stale)");
      throw IoError("cannot create " + path_.string() + ": " + std::strerror(errno));
    }
    std::fclose(f);
  }
  ~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

class Run {
 public:
  Run(const RunConfig& config, Command command, const PipelineHooks& hooks)
      : config_(config), command_(command), hooks_(hooks) {
    manifest_.command = std::string(to_string(command));
    manifest_.config = config.to_json();
    manifest_.config_hash = config.hash();
    manifest_.seed = config.seed;
    manifest_.started_at = now_utc();
    cache_dir_ = config.cache_dir.empty() ? default_cache_dir(config.out / "cache") : config.cache_dir;
  }

  RunManifest execute();

 private:
  template <typename F>
  auto stage(const char* name, F&& body) {
    const auto t0 = std::chrono::steady_clock::now();
    auto record = [&] {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
      manifest_.stages.push_back({name, dt.count()});
    };
    try {
      auto result = body();
      record();
      return result;
    } catch (const Error& e) {
      record();
      manifest_.failed_stage = name;
      throw Error(e.category(), std::string("stage '") + name + "': " + e.what());
    } catch (const std::exception& e) {
      record();
      manifest_.failed_stage = name;
      throw Error(ErrorCategory::kInternal, std::string("stage '") + name + "': " + e.what());
    }
  }

  void emit(const std::string& name, std::string_view content) {
    write_file_atomic(config_.out / name, content);
    manifest_.outputs[name] = sha256_hex(content);
  }
  void register_file(const std::string& name) { manifest_.outputs[name] = sha256_file(config_.out / name); }

  const Corpus& corpus();
  const DuplicateGraph& truth();
  const PreparedText& text();
  const EmbeddingSet& embeddings();
  const TopicModel& topic_model();
  const Partition& partition();
  std::vector<ReportId> queries();
  nlohmann::ordered_json corpus_json();

  void do_ingest();
  void do_preprocess();
  void do_topics();
  void do_partition();
  void do_embed();
  void do_detect();
  void do_evaluate(bool sweep);
  void do_train();
  void do_elbow();
  void do_summarize();

  const RunConfig& config_;
  Command command_;
  const PipelineHooks& hooks_;
  RunManifest manifest_;
  std::filesystem::path cache_dir_;

  std::optional<LoadResult> loaded_;
  std::vector<RowDiagnostic> link_rejected_;
  std::optional<Corpus> corpus_;
  std::optional<DuplicateGraph> truth_;
  std::optional<PreparedText> text_;
  std::optional<EmbeddingSet> embeddings_;
  std::optional<TopicModel> topic_model_;
  std::optional<Partition> partition_;
  std::optional<nlohmann::ordered_json> summary_subset_;
};

const Corpus& Run::corpus() {
  if (!corpus_) {
    stage("ingest", [&] {
      if (config_.dataset.empty()) throw ConfigError("no dataset configured");
      manifest_.input_hashes[config_.dataset.string()] = sha256_file(config_.dataset);
      loaded_ = load_corpus(config_.dataset, config_.format);
      Corpus c = loaded_->corpus;
      if (!config_.links.empty()) {
        manifest_.input_hashes[config_.links.string()] = sha256_file(config_.links);
        auto linked = apply_link_file(c, config_.links);
        link_rejected_ = std::move(linked.rejected);
        c = std::move(linked.corpus);
      }
      corpus_ = std::move(c);
      return 0;
    });
  }
  return *corpus_;
}

const DuplicateGraph& Run::truth() {
  if (!truth_) truth_ = resolve_masters(corpus());
  return *truth_;
}

const PreparedText& Run::text() {
  if (!text_) {
    const Corpus& c = corpus();
    stage("preprocess", [&] {
      text_ = prepare_text(c);
      return 0;
    });
  }
  return *text_;
}

const EmbeddingSet& Run::embeddings() {
  if (!embeddings_) {
    const Corpus& c = corpus();
    const PreparedText* t = nullptr;
    if (config_.embedding.kind == EmbeddingProviderKind::kInternalTfidfProjection) t = &text();
    stage("embed", [&] {
      EmbeddingProviderConfig ec = config_.embedding;
      ec.seed = config_.seed;
      if (ec.external.cache_dir.empty()) ec.external.cache_dir = cache_dir_;
      static const PreparedText none{};
      embeddings_ = embed_corpus(c, t ? *t : none, ec, hooks_.embed_transport, hooks_.sleeper);
      return 0;
    });
  }
  return *embeddings_;
}

const TopicModel& Run::topic_model() {
  if (!topic_model_) {
    const PreparedText& t = text();
    stage("topics", [&] {
      LdaOptions o;
      o.k = config_.k_topics;
      o.alpha = config_.lda_alpha;
      o.beta = config_.lda_beta;
      o.iterations = config_.lda_iterations;
      o.seed = config_.seed;
      topic_model_ = fit_lda(t.dtm, o);
      topic_model_->set_vocab_hash(t.vocab.content_hash());
      return 0;
    });
  }
  return *topic_model_;
}

const Partition& Run::partition() {
  if (!partition_) {
    switch (config_.strategy) {
      case PartitionStrategy::kNone:
        partition_ = stage("partition", [&] { return partition_none(corpus()); });
        break;
      case PartitionStrategy::kQuarter:
        partition_ = stage("partition", [&] { return partition_by_quarter(corpus()); });
        break;
      case PartitionStrategy::kTopic: {
        const TopicModel& m = topic_model();
        partition_ = stage("partition", [&] { return partition_by_topic(m, corpus()); });
        break;
      }
      case PartitionStrategy::kKMeans: {
        const EmbeddingSet& e = embeddings();
        partition_ = stage("partition", [&] {
          KMeansOptions o;
          o.k = config_.kmeans_k;
          o.seed = config_.seed;
          o.restarts = config_.kmeans_restarts;
          return partition_by_kmeans(kmeans_fit(e.vectors, o), e);
        });
        break;
      }
    }
  }
  return *partition_;
}

std::vector<ReportId> Run::queries() {
  if (!config_.query_split) return corpus().ids();
  return split(corpus(), *config_.query_split, config_.seed).test;
}

nlohmann::ordered_json Run::corpus_json() {
  nlohmann::ordered_json j;
  j["source"] = config_.dataset.string();
  j["sha256"] = manifest_.input_hashes[config_.dataset.string()];
  j["reports"] = corpus().size();
  j["duplicates"] = static_cast<std::size_t>(
      std::count_if(corpus().reports().begin(), corpus().reports().end(), [](const BugReport& r) { return r.is_duplicate; }));
  if (summary_subset_) j["summarized_subset"] = *summary_subset_;
  return j;
}

void Run::do_ingest() {
  const Corpus& c = corpus();
  const DuplicateGraph& g = truth();
  emit("corpus.jsonl", to_jsonl(c));
  nlohmann::ordered_json j;
  j["source"] = config_.dataset.string();
  j["reports"] = c.size();
  j["duplicate_share"] = duplicate_share(c);
  j["duplicate_groups"] = static_cast<std::size_t>(
      std::count_if(g.groups().begin(), g.groups().end(), [](const auto& kv) { return kv.second.size() > 1; }));
  j["dangling_links"] = g.dangling_links();
  auto diag = [](const std::vector<RowDiagnostic>& rows) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (const auto& r : rows) a.push_back({{"row", r.row}, {"field", r.field}, {"message", r.message}});
    return a;
  };
  j["rejected_rows"] = diag(loaded_->rejected);
  j["rejected_links"] = diag(link_rejected_);
  emit("ingest.json", dump_json(j));
}

void Run::do_preprocess() {
  const PreparedText& t = text();
  stage("emit", [&] {
    t.vocab.save(config_.out / "vocab.tsv");
    register_file("vocab.tsv");
    save_doc_term_matrix(t.dtm, config_.out / "dtm.csv");
    register_file("dtm.csv");
    nlohmann::ordered_json j;
    j["documents"] = t.dtm.counts.rows();
    j["vocabulary"] = t.vocab.size();
    j["nonzeros"] = t.dtm.counts.nonZeros();
    j["vocab_sha256"] = t.vocab.content_hash();
    emit("preprocess.json", dump_json(j));
    return 0;
  });
}

void Run::do_topics() {
  const TopicModel& m = topic_model();
  stage("emit", [&] {
    save_topic_model(m, config_.out / "topic_model.json");
    register_file("topic_model.json");
    emit("topics.txt", topics_text(m, text().vocab));
    nlohmann::ordered_json j;
    j["k"] = m.k();
    j["log_likelihood"] = log_likelihood(m);
    std::vector<std::size_t> sizes(static_cast<std::size_t>(m.k()), 0);
    for (std::size_t d = 0; d < m.num_docs(); ++d) ++sizes[static_cast<std::size_t>(dominant_topic(m, d))];
    j["topic_sizes"] = sizes;
    emit("topics.json", dump_json(j));
    return 0;
  });
}

void Run::do_partition() {
  const Partition& p = partition();
  emit("partition.json", dump_json(p.to_json()));
}

void Run::do_embed() {
  const EmbeddingSet& e = embeddings();
  stage("emit", [&] {
    save_embeddings(e, config_.out / "embeddings.bin");
    register_file("embeddings.bin");
    nlohmann::ordered_json j;
    j["provider"] = e.provider_tag;
    j["rows"] = e.vectors.rows();
    j["dimension"] = e.vectors.cols();
    j["zero_rows"] = e.zero_rows();
    emit("embed.json", dump_json(j));
    return 0;
  });
}

void Run::do_detect() {
  const auto deltas = config_.deltas_for(Command::kDetect);
  const double delta = deltas.front();
  const std::size_t max_k = config_.k_list.empty() ? 0 : config_.k_list.back();
  const EmbeddingSet& e = embeddings();
  const Partition& p = partition();
  const auto qs = queries();
  const auto outcomes = stage("detect", [&] {
    SimilarityIndex index(e, p);
    return score_queries(index, qs, truth(), delta, max_k, config_.causal ? &corpus() : nullptr);
  });
  std::string lines;
  for (const auto& o : outcomes) {
    nlohmann::ordered_json j;
    j["query"] = o.query;
    j["group"] = o.group;
    j["predicted_duplicate"] = !o.above.empty();
    auto list = [](const std::vector<Candidate>& cs) {
      nlohmann::ordered_json a = nlohmann::ordered_json::array();
      for (const auto& c : cs) a.push_back({{"id", c.id}, {"similarity", c.similarity}});
      return a;
    };
    j["candidates"] = list(o.above);
    j["top"] = list(o.top);
    lines += j.dump() + "\n";
  }
  emit("detections.jsonl", lines);
}

void Run::do_evaluate(bool sweep) {
  const auto deltas = config_.deltas_for(sweep ? Command::kSweep : command_);
  const double min_delta = *std::min_element(deltas.begin(), deltas.end());
  const std::size_t max_k = config_.k_list.empty() ? 0 : config_.k_list.back();
  const EmbeddingSet& e = embeddings();
  const Partition& p = partition();
  const auto qs = queries();
  const DuplicateGraph& g = truth();
  const auto outcomes = stage("detect", [&] {
    SimilarityIndex index(e, p);
    return score_queries(index, qs, g, min_delta, max_k, config_.causal ? &corpus() : nullptr);
  });
  auto reports = stage("evaluate", [&] { return sweep_thresholds(outcomes, deltas, g, config_.k_list); });

  nlohmann::ordered_json meta;
  meta["strategy"] = std::string(to_string(config_.strategy));
  meta["groups"] = p.groups.size();
  meta["provider"] = e.provider_tag;
  meta["causal"] = config_.causal;
  meta["seed"] = config_.seed;
  meta["config_hash"] = manifest_.config_hash;
  for (auto& r : reports) r.metadata = meta;

  nlohmann::ordered_json j;
  j["command"] = std::string(to_string(command_));
  j["config"] = config_.to_json();
  j["corpus"] = corpus_json();
  j["partition"] = {{"strategy", std::string(to_string(p.strategy))}, {"params", p.params}, {"groups", p.groups.size()}};
  j["evaluations"] = nlohmann::ordered_json::array();
  for (const auto& r : reports) j["evaluations"].push_back(r.to_json());
  emit("report.json", dump_json(j));
  emit("report.txt", threshold_table(reports));
  if (sweep || deltas.size() > 1) emit("thresholds.csv", thresholds_csv(reports));
  if (!config_.k_list.empty()) {
    emit("topk.txt", topk_table(reports.front()));
    emit("topk.csv", topk_csv(reports.front()));
  }
}

void Run::do_train() {
  const Corpus& all = corpus();
  const Corpus base = config_.resolved_fixed_only ? filter_resolved_fixed(all) : all;
  if (base.empty()) throw DataError("no RESOLVED FIXED report to train on");
  const SplitCorpus sp = split(base, config_.train_split, config_.seed);
  const Corpus train = subset(base, sp.train);
  const Corpus test = subset(base, sp.test);

  FeatureConfig fc;
  fc.use_text_embedding = config_.use_text_embedding;
  fc.use_component_onehot = config_.use_component;
  fc.component_index = build_component_index(base, sp.train);

  // Text features are fitted on the training split only.
  std::optional<PreparedText> train_text;
  EmbeddingSet emb = stage("embed", [&] {
    EmbeddingSet out;
    if (!fc.use_text_embedding) {
      out.ids = base.ids();
      out.vectors = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(base.size()), 0);
      return out;
    }
    if (config_.embedding.kind == EmbeddingProviderKind::kInternalTfidfProjection) {
      train_text = prepare_text(train);
      const EmbeddingSet a = embed_internal(train_text->tfidf, config_.embedding.dimension, config_.seed);
      const EmbeddingSet b =
          embed_internal(tfidf(doc_term_matrix(test, train_text->vocab), train_text->tfidf.idf),
                         config_.embedding.dimension, config_.seed);
      out.provider_tag = a.provider_tag;
      out.ids = a.ids;
      out.ids.insert(out.ids.end(), b.ids.begin(), b.ids.end());
      out.vectors.resize(a.vectors.rows() + b.vectors.rows(), a.vectors.cols());
      out.vectors << a.vectors, b.vectors;
      return out;
    }
    EmbeddingProviderConfig ec = config_.embedding;
    if (ec.external.cache_dir.empty()) ec.external.cache_dir = cache_dir_;
    return embed_corpus(base, PreparedText{}, ec, hooks_.embed_transport, hooks_.sleeper);
  });

  std::vector<ReportId> train_ids = sp.train;
  if (config_.balance) {
    const auto keep = undersample(duplicate_labels(base, train_ids), config_.seed);
    std::vector<ReportId> kept;
    for (std::size_t i : keep) kept.push_back(train_ids[i]);
    train_ids = std::move(kept);
  }
  const Corpus fit_corpus = subset(base, train_ids);

  PerTopicOptions pto;
  pto.min_training_size = config_.min_topic_size;
  pto.mlp = config_.mlp;
  pto.mlp.seed = config_.seed;

  std::optional<Classifier> global;
  std::optional<PerTopicModels> per_topic;
  std::optional<TopicModel> lda;
  stage("train", [&] {
    if (config_.per_topic) {
      if (!train_text) train_text = prepare_text(train);
      LdaOptions o;
      o.k = config_.k_topics;
      o.alpha = config_.lda_alpha;
      o.beta = config_.lda_beta;
      o.iterations = config_.lda_iterations;
      o.seed = config_.seed;
      lda = fit_lda(train_text->dtm, o);
      std::unordered_map<ReportId, int> topic;
      for (std::size_t d = 0; d < lda->num_docs(); ++d) topic.emplace(lda->doc_ids()[d], dominant_topic(*lda, d));
      per_topic = train_per_topic(
          fit_corpus, [&](const BugReport& r) { return topic.at(r.id); }, config_.classifier, fc, emb, pto);
    } else {
      global = train_classifier(config_.classifier, build_feature_matrix(fit_corpus, fit_corpus.ids(), fc, emb),
                                duplicate_labels(fit_corpus, fit_corpus.ids()), pto.mlp);
    }
    return 0;
  });

  const ClassificationReport report = stage("evaluate", [&] {
    const Eigen::MatrixXd x = build_feature_matrix(test, test.ids(), fc, emb);
    std::vector<int> predicted;
    for (std::size_t i = 0; i < test.size(); ++i) {
      const BugReport& r = test.reports()[i];
      const Classifier* model = global ? &*global : nullptr;
      if (per_topic) {
        FoldInOptions fo;
        fo.seed = config_.seed;
        model = &per_topic->route(infer_topic(*lda, train_text->vocab, analyze(full_text(r), default_stopwords()), fo));
      }
      predicted.push_back(model->predict(x.row(static_cast<Eigen::Index>(i)).transpose()).label);
    }
    return classification_report(duplicate_labels(test, test.ids()), predicted);
  });

  nlohmann::ordered_json j;
  j["command"] = "train";
  j["config"] = config_.to_json();
  j["corpus"] = corpus_json();
  j["split"] = {{"scheme", std::string(to_string(config_.train_split))},
                {"train", sp.train.size()},
                {"validation", sp.validation.size()},
                {"test", sp.test.size()},
                {"trained_on", train_ids.size()}};
  j["features"] = {{"text", fc.use_text_embedding},
                   {"component", fc.use_component_onehot},
                   {"components", fc.component_index.size()},
                   {"dimension", fc.dimension(static_cast<int>(emb.vectors.cols()))}};
  j["classifier"] = std::string(to_string(config_.classifier));
  if (per_topic) {
    std::vector<int> trained;
    for (const auto& [t, m] : per_topic->by_topic) trained.push_back(t);
    j["per_topic"] = {{"trained_topics", trained}, {"warnings", per_topic->warnings}};
  }
  j["report"] = report.to_json();
  emit("classification.json", dump_json(j));
  emit("classification.txt", report.to_text());

  nlohmann::ordered_json models;
  if (global) models["global"] = classifier_to_json(*global);
  if (per_topic) {
    models["global"] = classifier_to_json(*per_topic->global);
    nlohmann::ordered_json bt = nlohmann::ordered_json::object();
    for (const auto& [t, m] : per_topic->by_topic) bt[std::to_string(t)] = classifier_to_json(m);
    models["by_topic"] = std::move(bt);
  }
  emit("model.json", models.dump() + "\n");
}

void Run::do_elbow() {
  const EmbeddingSet& e = embeddings();
  const auto ks = even_ks(config_.elbow_max_k);
  const auto table = stage("elbow", [&] { return elbow_scan(e.vectors, ks, config_.seed, config_.kmeans_restarts); });
  std::string csv = "k,inertia\n";
  char buf[64];
  for (const auto& p : table) {
    std::snprintf(buf, sizeof buf, "%d,%.17g\n", p.k, p.inertia);
    csv += buf;
  }
  emit("elbow.csv", csv);
  nlohmann::ordered_json j;
  j["provider"] = e.provider_tag;
  j["baseline_inertia"] = single_cluster_inertia(e.vectors);
  j["restarts"] = config_.kmeans_restarts;
  j["seed"] = config_.seed;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& p : table) rows.push_back({{"k", p.k}, {"inertia", p.inertia}});
  j["table"] = std::move(rows);
  emit("elbow.json", dump_json(j));
}

void Run::do_summarize() {
  if (!config_.summarizer) throw ConfigError("summarize needs llm_endpoint and llm_model");
  const Corpus& base = corpus();
  SummarizerConfig sc = *config_.summarizer;
  if (sc.cache_dir.empty()) sc.cache_dir = cache_dir_;
  std::unique_ptr<HttpTransport> owned;
  HttpTransport* transport = hooks_.llm_transport;
  if (!transport) {
    owned = make_http_transport(sc.timeout);
    transport = owned.get();
  }
  const SummarizedCorpus summarized = stage("summarize", [&] { return summarize_corpus(base, sc, *transport, hooks_.sleeper); });
  emit("summaries.json", dump_json(summarized.to_json()));
  if (summarized.summaries.empty()) throw DataError("no report could be summarized");

  // Downstream stages see the summarized subset only.
  Corpus sub = summarized.apply(base);
  summary_subset_ = nlohmann::ordered_json{{"requested", summarized.requested},
                                           {"summarized", summarized.summaries.size()},
                                           {"failed", summarized.failures.size()},
                                           {"model", summarized.model}};
  corpus_ = std::move(sub);
  truth_.reset();
  do_evaluate(false);
}

RunManifest Run::execute() {
  std::error_code ec;
  std::filesystem::create_directories(config_.out, ec);
  if (ec) throw IoError("cannot create " + config_.out.string() + ": " + ec.message());
  DirectoryLock lock(config_.out);
  try {
    switch (command_) {
      case Command::kIngest:
        do_ingest();
        break;
      case Command::kPreprocess:
        do_preprocess();
        break;
      case Command::kTopics:
        do_topics();
        break;
      case Command::kPartition:
        do_partition();
        break;
      case Command::kEmbed:
        do_embed();
        break;
      case Command::kDetect:
        do_detect();
        break;
      case Command::kEvaluate:
        do_evaluate(false);
        break;
      case Command::kSweep:
        do_evaluate(true);
        break;
      case Command::kTrain:
        do_train();
        break;
      case Command::kElbow:
        do_elbow();
        break;
      case Command::kSummarize:
        do_summarize();
        break;
    }
  } catch (const std::exception& e) {
    manifest_.status = "failed";
    manifest_.error = e.what();
    if (manifest_.failed_stage.empty()) manifest_.failed_stage = std::string(to_string(command_));
    manifest_.finished_at = now_utc();
    try {
      write_file_atomic(config_.out / "manifest.json", dump_json(manifest_.to_json()));
    } catch (...) {
    }
    throw;
  }
  manifest_.finished_at = now_utc();
  write_file_atomic(config_.out / "manifest.json", dump_json(manifest_.to_json()));
  return manifest_;
}

}  // namespace

RunManifest run_pipeline(const RunConfig& config, Command command, const PipelineHooks& hooks) {
  config.validate();
  if (command == Command::kSummarize) {
    if (!config.summarizer) throw ConfigError("summarize needs llm_endpoint and llm_model");
    config.summarizer->validate();
  }
  Run run(config, command, hooks);
  return run.execute();
}

}  // namespace dupdetect
