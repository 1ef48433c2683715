// dupdetect command-line front end.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dupdetect/error.hpp"
#include "dupdetect/pipeline.hpp"
#include "dupdetect/report.hpp"

namespace {

struct Setting {
  const char* flag;
  const char* key;
  const char* help;
};

// Every subcommand accepts every setting; unused ones are ignored by the stage.
constexpr Setting kSettings[] = {
    {"--seed", "seed", "seed for every stochastic stage"},
    {"--out", "out", "output directory (owned exclusively by the run)"},
    {"--dataset", "dataset", "corpus file"},
    {"--format", "format", "corpus format: jsonl, csv or bin"},
    {"--links", "links", "sidecar dup_id,master_id link file"},
    {"--strategy", "strategy", "partition: topic, quarter, kmeans or none"},
    {"--k-topics", "k_topics", "LDA topic count"},
    {"--lda-iterations", "lda_iterations", "Gibbs sweeps"},
    {"--kmeans-k", "kmeans_k", "k-means cluster count"},
    {"--restarts", "kmeans_restarts", "k-means restarts"},
    {"--max-k", "max_k", "largest even k for the elbow scan"},
    {"--embedding", "embedding", "embedding provider: internal or external"},
    {"--embedding-dim", "embedding_dim", "internal embedding dimension"},
    {"--embed-endpoint", "embed_endpoint", "external embedding endpoint URL"},
    {"--embed-model", "embed_model", "external embedding model name"},
    {"--delta", "delta", "similarity threshold(s), comma separated"},
    {"--topk", "topk", "top-k cutoffs, comma separated"},
    {"--query-split", "query_split", "evaluate the test split only: train75_test25 or test25_then_train80_val20"},
    {"--classifier", "classifier", "nb or mlp"},
    {"--features", "features", "text, component or text+component"},
    {"--epochs", "epochs", "MLP epochs"},
    {"--learning-rate", "learning_rate", "MLP learning rate"},
    {"--batch-size", "batch_size", "MLP minibatch size"},
    {"--hidden", "hidden", "MLP hidden units"},
    {"--min-topic-size", "min_topic_size", "smallest topic trained on its own"},
    {"--balance", "balance", "none or undersample"},
    {"--split", "split", "training split scheme"},
    {"--llm-endpoint", "llm_endpoint", "chat-completion endpoint URL"},
    {"--llm-model", "llm_model", "chat-completion model name"},
    {"--max-reports", "max_reports", "reports to summarize"},
    {"--concurrency", "concurrency", "concurrent summarization requests"},
    {"--cache-dir", "cache_dir", "provider response cache"},
};

constexpr std::pair<const char*, const char*> kCommandHelp[] = {
    {"ingest", "load and validate a corpus"},
    {"preprocess", "tokenize, build the vocabulary and document-term matrix"},
    {"topics", "fit the LDA topic model"},
    {"partition", "group reports by topic, quarter, cluster or not at all"},
    {"embed", "embed every report"},
    {"detect", "list duplicate candidates per query"},
    {"evaluate", "threshold and top-k evaluation"},
    {"sweep", "threshold evaluation over several deltas"},
    {"train", "train and evaluate a duplicate classifier"},
    {"elbow", "k-means inertia over even k"},
    {"summarize", "rewrite reports with a chat model, then evaluate"},
};

struct Options {
  std::string config;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;
  bool causal = false;
  bool per_topic = false;
};

void add_settings(CLI::App* sub, Options& opts) {
  sub->add_option("--config", opts.config, "JSON or key=value settings file (flags win)");
  for (const auto& s : kSettings) sub->add_option(s.flag, opts.values[s.key], s.help);
  sub->add_flag("--causal", opts.causal, "only search reports created before the query");
  sub->add_flag("--per-topic", opts.per_topic, "train one classifier per topic");
  sub->add_option("--set", opts.sets, "extra key=value setting (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Duplicate bug report detection"};
  app.require_subcommand(1);
  Options opts;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : kCommandHelp) {
    CLI::App* sub = app.add_subcommand(name, help);
    add_settings(sub, opts);
    subs[name] = sub;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(dupdetect::ErrorCategory::kConfig);
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  try {
    dupdetect::RunConfig config;
    if (!opts.config.empty()) config = dupdetect::load_run_config(opts.config);
    for (const auto& s : kSettings) {
      const auto& v = opts.values[s.key];
      if (subs[command]->count(s.flag) > 0) config.set(s.key, v);
    }
    if (opts.causal) config.causal = true;
    if (opts.per_topic) config.per_topic = true;
    for (const auto& kv : opts.sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw dupdetect::ConfigError("--set expects key=value, got '" + kv + "'");
      config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }

    const auto cmd = dupdetect::parse_command(command);
    const auto manifest = dupdetect::run_pipeline(config, cmd);
    for (const char* shown : {"report.txt", "topk.txt", "classification.txt", "elbow.csv"}) {
      if (manifest.outputs.contains(shown)) std::cout << dupdetect::read_file(config.out / shown) << '\n';
    }
    std::cout << "wrote " << manifest.outputs.size() << " file(s) to " << config.out.string() << " (see manifest.json)\n";
    return 0;
  } catch (const dupdetect::Error& e) {
    std::cerr << "dupdetect " << command << ": " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "dupdetect " << command << ": internal error: " << e.what() << '\n';
    return static_cast<int>(dupdetect::ErrorCategory::kInternal);
  }
}
